"""Operator surface: run sessions, inspect decisions, render reports.

Commands:

    run            execute sessions over scenario files
    validate-kb    report knowledge-base violations
    explain        show the decision trace behind an optimize round
    parse-profile  turn profiler exports into structured evidence
    report         metrics table over a sessions directory
    replay         rebuild a session from its log and check equivalence

Exit codes: 0 on success, 1 on operational errors (invalid KB, missing
trace, replay mismatch), 2 on usage errors.  ``--machine`` restricts
standard output to structured JSON documents, one per line.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from pathlib import Path
from typing import List, Optional

from .backends import HttpBackend, ReasoningBackend, ScriptedBackend
from .engine import DecisionTrace
from .errors import KernelsmithError, NoTrace
from .evaluation import HarnessConfig, SubprocessEvaluator, load_scenario
from .knowledge import load_default_kb, load_knowledge_base, validate_knowledge_base
from .orchestrator import (
    SessionConfig,
    compute_metrics,
    metrics_by_level,
    run_session,
)
from .profiling import parse_ncu_csv, parse_nsys_summary
from .sessionlog import SessionLog
from .trajectory import CheckOutcome, RoundRecord, SessionState, consider_promotion, record_round


def _emit(args, doc: dict, human: str) -> None:
    if args.machine:
        print(json.dumps(doc, sort_keys=True))
    elif human:
        print(human)


def _load_kb(args, parser):
    if args.kb is None:
        return load_default_kb()
    path = Path(args.kb)
    if not path.exists():
        parser.error(f"knowledge base path {path} does not exist")
    kb = load_knowledge_base(path)
    report = validate_knowledge_base(kb)
    if report.errors():
        for v in report.errors():
            print(f"error [{v.code}] {v.location}: {v.message}", file=sys.stderr)
        raise KernelsmithError(f"knowledge base {path} failed validation")
    return kb


def _build_backend(args, parser) -> ReasoningBackend:
    if args.backend == "scripted":
        fixtures = os.environ.get("KERNELSMITH_FIXTURES")
        return ScriptedBackend(fixtures_dir=Path(fixtures) if fixtures else None)
    endpoint = os.environ.get("KERNELSMITH_ENDPOINT")
    model = os.environ.get("KERNELSMITH_MODEL")
    if not endpoint or not model:
        parser.error(
            "--backend http needs KERNELSMITH_ENDPOINT and KERNELSMITH_MODEL set"
        )
    return HttpBackend(
        endpoint, model, api_key=os.environ.get("KERNELSMITH_API_KEY")
    )


def _session_config(args) -> SessionConfig:
    return SessionConfig(
        max_rounds=args.rounds,
        seed_count=args.seeds,
        rt=args.rt,
        at=args.at,
        tolerance=args.tolerance,
    )


def _scenario_paths(args, parser) -> List[Path]:
    paths: List[Path] = []
    for raw in args.scenario:
        path = Path(raw)
        if path.is_dir():
            paths.extend(sorted(path.glob("*.json")))
        elif path.is_file():
            paths.append(path)
        else:
            parser.error(f"scenario path {path} does not exist")
    if not paths:
        parser.error("no scenario files found")
    return paths


# --- run --------------------------------------------------------------------


def cmd_run(args, parser) -> int:
    if args.evaluator == "harness" and not args.harness_cmd:
        parser.error("--evaluator harness needs --harness-cmd")
    kb = _load_kb(args, parser)
    backend = _build_backend(args, parser)
    config = _session_config(args)
    sessions_dir = Path(args.sessions_dir) if args.sessions_dir else None
    if not args.machine:
        print(
            f"config: rounds={config.max_rounds} seeds={config.seed_count} "
            f"rt={config.rt} at={config.at} tolerance={config.tolerance}"
        )
    results = []
    errored = []
    for path in _scenario_paths(args, parser):
        scenario = load_scenario(path)
        evaluator = None
        if args.evaluator == "harness":
            evaluator = SubprocessEvaluator(
                shlex.split(args.harness_cmd),
                scenario.reference,
                HarnessConfig(
                    warmup=config.warmup,
                    iters=config.iters,
                    tolerance_abs=config.tolerance,
                    tolerance_rel=config.tolerance,
                    profile=config.profile_every_success,
                ),
            )
        try:
            result = run_session(
                scenario, config, kb, backend,
                evaluator=evaluator, sessions_dir=sessions_dir,
            )
        except KernelsmithError as exc:
            errored.append(scenario.task_id)
            print(f"task {scenario.task_id} aborted: {exc}", file=sys.stderr)
            continue
        finally:
            if evaluator is not None:
                evaluator.close()
        results.append(result)
        _emit(
            args,
            {
                "task_id": result.task_id,
                "level": result.level,
                "success": result.success,
                "best_kernel_id": result.best_kernel_id,
                "best_speedup": result.best_speedup,
                "rounds_used": result.rounds_used,
            },
            f"task {result.task_id}: success={result.success} "
            f"best={result.best_kernel_id} speedup={result.best_speedup:.4g} "
            f"rounds={result.rounds_used}",
        )
    if results:
        overall = compute_metrics(results, config.max_rounds)
        by_level = metrics_by_level(results, config.max_rounds)
        _emit(
            args,
            {
                "metrics": overall.to_dict(),
                "by_level": {str(k): v.to_dict() for k, v in by_level.items()},
            },
            _metrics_table(overall, by_level, [r.level for r in results]),
        )
    return 1 if errored else 0


def _metrics_table(overall, by_level, levels) -> str:
    header = f"{'level':>7} {'tasks':>5} {'success':>8} {'speedup':>8} {'fast1':>6} {'/round':>7}"
    lines = [header]
    for level, report in by_level.items():
        count = sum(1 for l in levels if l == level)
        lines.append(
            f"{level:>7} {count:>5} {report.success_rate:>8.2f} "
            f"{report.mean_speedup:>8.3f} {report.fast1:>6.2f} "
            f"{report.per_round_efficiency:>7.3f}"
        )
    lines.append(
        f"{'all':>7} {len(levels):>5} {overall.success_rate:>8.2f} "
        f"{overall.mean_speedup:>8.3f} {overall.fast1:>6.2f} "
        f"{overall.per_round_efficiency:>7.3f}"
    )
    return "\n".join(lines)


# --- validate-kb ------------------------------------------------------------


def cmd_validate_kb(args, parser) -> int:
    path = Path(args.path)
    if not path.exists():
        parser.error(f"knowledge base path {path} does not exist")
    kb = load_knowledge_base(path)
    report = validate_knowledge_base(kb)
    errors, warnings = report.errors(), report.warnings()
    doc = {
        "errors": [
            {"code": v.code, "location": v.location, "message": v.message}
            for v in errors
        ],
        "warnings": [
            {"code": v.code, "location": v.location, "message": v.message}
            for v in warnings
        ],
    }
    if args.machine:
        print(json.dumps(doc, sort_keys=True))
    else:
        for v in errors:
            print(f"error [{v.code}] {v.location}: {v.message}")
        for v in warnings:
            print(f"warning [{v.code}] {v.location}: {v.message}")
        if not errors and not warnings:
            print("knowledge base is clean")
    return 1 if errors else 0


# --- explain ----------------------------------------------------------------


def _render_trace(trace: dict) -> str:
    lines = ["decision trace"]
    if trace["standardized"]:
        lines.append("  standardized fields:")
        for name, value in sorted(trace["standardized"].items()):
            lines.append(f"    {name} = {value:.6g}")
    if trace["derived"]:
        lines.append("  derived fields:")
        for name, value in sorted(trace["derived"].items()):
            rendered = "missing" if value is None else f"{value:.6g}"
            lines.append(f"    {name} = {rendered}")
    if trace["tiers"]:
        lines.append("  headroom tiers:")
        for name, label in sorted(trace["tiers"].items()):
            lines.append(f"    {name}: {label}")
    satisfied = sorted(n for n, v in trace["predicates"].items() if v)
    lines.append("  predicates satisfied: " + (", ".join(satisfied) or "(none)"))
    lines.append(
        "  bottleneck candidates: "
        + (", ".join(trace["bottleneck_candidates"]) or "(none)")
    )
    if trace["priority_overrides_applied"]:
        lines.append(
            "  priority overrides: " + ", ".join(trace["priority_overrides_applied"])
        )
    for step in trace["walk"]:
        case = step["case_id"] or "-"
        lines.append(f"  walk: {step['bottleneck_type']} case {case}: {step['outcome']}")
    for veto in trace["vetoes"]:
        if veto["active"]:
            removed = ", ".join(veto["removed"]) or "(nothing)"
            lines.append(f"  veto {veto['rule_name']} active, removed: {removed}")
    if trace["fallback"]:
        lines.append("  matched: none (fallback mode)")
    else:
        lines.append(
            f"  matched: case {trace['matched_case_id']} "
            f"({trace['matched_bottleneck']})"
        )
    lines.append("  methods: " + (", ".join(trace["methods"]) or "(none)"))
    if trace["missing_fields"]:
        lines.append("  missing fields: " + ", ".join(trace["missing_fields"]))
    return "\n".join(lines)


def cmd_explain(args, parser) -> int:
    log = SessionLog(Path(args.sessions_dir), args.task)
    if not log.exists():
        parser.error(f"no session log for task {args.task!r} in {args.sessions_dir}")
    if args.round not in log.round_indices():
        parser.error(f"session {args.task!r} has no round {args.round}")
    doc = log.read_round(args.round)
    if doc["trace"] is None:
        raise NoTrace(
            f"round {args.round} took the {doc['branch']} branch; "
            "only optimize rounds carry a decision trace"
        )
    trace = doc["trace"]
    DecisionTrace.from_dict(trace)  # refuse to emit something that cannot reload
    if args.machine:
        print(json.dumps(trace, sort_keys=True))
    else:
        print(_render_trace(trace))
    return 0


# --- parse-profile ----------------------------------------------------------


def cmd_parse_profile(args, parser) -> int:
    if not args.ncu and not args.nsys:
        parser.error("give at least one of --ncu or --nsys")
    doc = {}
    human = []
    if args.ncu:
        path = Path(args.ncu)
        if not path.is_file():
            parser.error(f"profile export {path} does not exist")
        profile = parse_ncu_csv(path.read_text(), what=str(path))
        doc["ncu"] = {
            "kernels": {
                k.kernel_name: {
                    "launch_count": k.launch_count,
                    "metrics": dict(k.metrics),
                    "units": dict(k.units),
                }
                for k in profile.kernels
            },
            "aggregate": profile.aggregate(),
            "skipped": [{"line": f.line, "detail": f.detail} for f in profile.skipped],
        }
        human.append(f"ncu: {len(profile.kernels)} kernel(s)")
        for k in profile.kernels:
            human.append(f"  {k.kernel_name}: {k.launch_count} launch(es)")
            for name, value in sorted(k.metrics.items()):
                unit = k.units.get(name, "")
                human.append(f"    {name} = {value:.6g} {unit}".rstrip())
        for fault in profile.skipped:
            print(f"ncu line {fault.line}: {fault.detail}", file=sys.stderr)
    if args.nsys:
        path = Path(args.nsys)
        if not path.is_file():
            parser.error(f"profile export {path} does not exist")
        features = parse_nsys_summary(path.read_text(), what=str(path))
        doc["nsys"] = {
            "values": dict(features.values),
            "skipped": [{"line": f.line, "detail": f.detail} for f in features.skipped],
        }
        human.append("nsys run features:")
        for name, value in sorted(features.values.items()):
            human.append(f"  {name} = {value:.6g}")
        for fault in features.skipped:
            print(f"nsys line {fault.line}: {fault.detail}", file=sys.stderr)
    _emit(args, doc, "\n".join(human))
    return 0


# --- report -----------------------------------------------------------------


def _load_finished_sessions(sessions_dir: Path, parser):
    entries = []
    for task_dir in sorted(p for p in sessions_dir.iterdir() if p.is_dir()):
        log = SessionLog(sessions_dir, task_dir.name)
        if not log.exists():
            continue
        final = log.read_final()
        if final is None:
            continue
        header = log.read_header()
        entries.append((header, final))
    if not entries:
        parser.error(f"no finished sessions under {sessions_dir}")
    return entries


def cmd_report(args, parser) -> int:
    from .orchestrator import SessionResult

    sessions_dir = Path(args.sessions_dir)
    if not sessions_dir.is_dir():
        parser.error(f"sessions directory {sessions_dir} does not exist")
    entries = _load_finished_sessions(sessions_dir, parser)
    rounds = {header["config"]["max_rounds"] for header, _ in entries}
    if len(rounds) != 1:
        print(
            f"sessions disagree on max_rounds ({sorted(rounds)}); "
            "report needs a uniform round budget",
            file=sys.stderr,
        )
        return 1
    max_rounds = rounds.pop()
    results = [
        SessionResult(
            task_id=final["task_id"],
            level=final.get("level", header.get("level", 1)),
            success=final["success"],
            best_kernel_id=final["best_kernel_id"],
            best_speedup=final["speedup_best"],
            rounds_used=final["rounds_used"],
            state=None,
        )
        for header, final in entries
    ]
    overall = compute_metrics(results, max_rounds)
    by_level = metrics_by_level(results, max_rounds)
    _emit(
        args,
        {
            "max_rounds": max_rounds,
            "tasks": len(results),
            "metrics": overall.to_dict(),
            "by_level": {str(k): v.to_dict() for k, v in by_level.items()},
        },
        _metrics_table(overall, by_level, [r.level for r in results]),
    )
    return 0


# --- replay -----------------------------------------------------------------


def _rebuild_state(log: SessionLog) -> SessionState:
    from .trajectory import initial_state, initial_state_failed_seed

    header = log.read_header()
    config = SessionConfig.from_dict(header["config"])
    seed_results = {
        entry["candidate"]["kernel_id"]: entry["result"] for entry in header["seeds"]
    }
    selected = header["selected_seed"]
    seed_doc = seed_results[selected]
    if header["repair_first"]:
        correct = seed_doc["correct"]
        state = initial_state_failed_seed(
            selected,
            CheckOutcome(seed_doc["compiled"]["passed"], seed_doc["compiled"]["feedback"]),
            CheckOutcome(correct["passed"], correct["feedback"])
            if correct
            else CheckOutcome(False, "not evaluated (compilation failed)"),
            rt=config.rt,
            at=config.at,
        )
    else:
        state = initial_state(selected, seed_doc["speedup"], rt=config.rt, at=config.at)
    for doc in log.read_rounds():
        record = RoundRecord.from_dict(doc["record"])
        record_round(state, record)
        if record.profile is not None:
            decision = consider_promotion(state, record.kernel_id, record.profile.speedup)
            logged = doc["promotion"]
            if logged != {
                "update_best": decision.update_best,
                "update_base": decision.update_base,
            }:
                raise KernelsmithError(
                    f"round {record.round_index}: logged promotion {logged} "
                    f"does not follow from the recorded speedups"
                )
    return state


def cmd_replay(args, parser) -> int:
    log = SessionLog(Path(args.sessions_dir), args.task)
    if not log.exists():
        parser.error(f"no session log for task {args.task!r} in {args.sessions_dir}")
    final = log.read_final()
    if final is None:
        raise KernelsmithError(
            f"session {args.task!r} has no final document; it is unfinished"
        )
    state = _rebuild_state(log)
    rebuilt = {
        "best_kernel_id": state.best_kernel_id,
        "speedup_best": state.speedup_best,
        "base_kernel_id": state.base_kernel_id,
        "speedup_base": state.speedup_base,
        "rounds_used": state.round_counter,
        "success": state.best_kernel_id is not None,
    }
    logged = {key: final[key] for key in rebuilt}
    if rebuilt != logged:
        print(f"replay mismatch:\n  log:    {logged}\n  replay: {rebuilt}",
              file=sys.stderr)
        return 1
    _emit(
        args,
        {"task_id": args.task, "equivalent": True, "rounds": state.round_counter,
         "final": rebuilt},
        f"session {args.task!r} replays cleanly over {state.round_counter} round(s)",
    )
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelsmith",
        description="Closed-loop GPU kernel optimization sessions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run sessions over scenario files")
    run.add_argument("--scenario", action="append", required=True,
                     help="scenario file or directory (repeatable)")
    run.add_argument("--kb", help="knowledge base directory (default: built-in)")
    run.add_argument("--rounds", type=int, default=15)
    run.add_argument("--seeds", type=int, default=3)
    run.add_argument("--rt", type=float, default=0.3)
    run.add_argument("--at", type=float, default=0.3)
    run.add_argument("--tolerance", type=float, default=1e-2)
    run.add_argument("--backend", choices=("scripted", "http"), default="scripted")
    run.add_argument("--evaluator", choices=("scripted", "harness"), default="scripted")
    run.add_argument("--harness-cmd", default="",
                     help="command line that starts the evaluation harness")
    run.add_argument("--sessions-dir", help="directory for session logs")
    run.add_argument("--machine", action="store_true")
    run.set_defaults(handler=cmd_run)

    validate = sub.add_parser("validate-kb", help="validate a knowledge base")
    validate.add_argument("path")
    validate.add_argument("--machine", action="store_true")
    validate.set_defaults(handler=cmd_validate_kb)

    explain = sub.add_parser("explain", help="show a round's decision trace")
    explain.add_argument("--sessions-dir", required=True)
    explain.add_argument("--task", required=True)
    explain.add_argument("--round", type=int, required=True)
    explain.add_argument("--machine", action="store_true")
    explain.set_defaults(handler=cmd_explain)

    profile = sub.add_parser("parse-profile", help="parse profiler exports")
    profile.add_argument("--ncu", help="kernel profiler CSV export")
    profile.add_argument("--nsys", help="system profiler summary export")
    profile.add_argument("--machine", action="store_true")
    profile.set_defaults(handler=cmd_parse_profile)

    report = sub.add_parser("report", help="metrics over finished sessions")
    report.add_argument("--sessions-dir", required=True)
    report.add_argument("--machine", action="store_true")
    report.set_defaults(handler=cmd_report)

    replay = sub.add_parser("replay", help="rebuild a session from its log")
    replay.add_argument("--sessions-dir", required=True)
    replay.add_argument("--task", required=True)
    replay.add_argument("--machine", action="store_true")
    replay.set_defaults(handler=cmd_replay)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args, parser)
    except KernelsmithError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
