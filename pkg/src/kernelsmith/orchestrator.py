"""The session loop: seeds, branch selection, evaluation, promotion, logging.

One session optimizes one task.  Seeds are drafted and evaluated first; the
fastest passing one becomes the base kernel (with a repair-first start when
nothing passes).  Each round then either repairs the latest failing kernel
or plans and applies an optimization to the current base, guided by the
knowledge-base recommendation over the base kernel's profiling evidence.
Round records, promotion decisions, and decision traces all land in the
session log, which is complete enough to resume an interrupted session or
replay a finished one.

The branch rule is the loop's backbone: a round is a repair round exactly
when the previous evaluation failed (equivalently, when a repair chain is
open), and profiling evidence only ever comes from kernels that passed both
checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .agents import (
    KernelCandidate,
    apply_optimization,
    apply_repair,
    diagnose,
    generate_seeds,
    plan_optimization,
)
from .backends import ReasoningBackend
from .engine import DecisionTrace, EvidenceBundle, recommend
from .errors import MalformedResponse, SessionFault
from .evaluation import EvaluationBackend, ReviewerResult, Scenario, ScriptedEvaluator
from .features import extract_code_features
from .knowledge import KnowledgeBase
from .sessionlog import SessionLog
from .trajectory import (
    CheckOutcome,
    PlanRef,
    ProfileOutcome,
    RoundRecord,
    SessionState,
    consider_promotion,
    initial_state,
    initial_state_failed_seed,
    optimization_context,
    record_round,
    repair_context,
)

_NOT_EVALUATED = "not evaluated (compilation failed)"


@dataclass(frozen=True)
class SessionConfig:
    max_rounds: int = 15
    seed_count: int = 3
    rt: float = 0.3
    at: float = 0.3
    tolerance: float = 1e-2
    warmup: int = 25
    iters: int = 100
    profile_every_success: bool = True

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if self.rt < 0 or self.at < 0:
            raise ValueError("promotion thresholds must be non-negative")

    def to_dict(self) -> dict:
        return {
            "max_rounds": self.max_rounds,
            "seed_count": self.seed_count,
            "rt": self.rt,
            "at": self.at,
            "tolerance": self.tolerance,
            "warmup": self.warmup,
            "iters": self.iters,
            "profile_every_success": self.profile_every_success,
        }

    @staticmethod
    def from_dict(doc: dict) -> "SessionConfig":
        return SessionConfig(**doc)


@dataclass(frozen=True)
class SessionResult:
    task_id: str
    level: int
    success: bool
    best_kernel_id: Optional[str]
    best_speedup: float
    rounds_used: int
    state: SessionState


@dataclass(frozen=True)
class MetricsReport:
    success_rate: float
    mean_speedup: float
    fast1: float
    per_round_efficiency: float

    def to_dict(self) -> dict:
        return {
            "success_rate": self.success_rate,
            "mean_speedup": self.mean_speedup,
            "fast1": self.fast1,
            "per_round_efficiency": self.per_round_efficiency,
        }


def select_seed(
    candidates: Sequence[KernelCandidate], results: Dict[str, ReviewerResult]
) -> Tuple[KernelCandidate, bool]:
    """Pick the session's starting kernel; True means start in repair.

    Passing candidates compete on mean latency.  With none passing, the
    most recent compiling candidate is taken (its verify failure seeds the
    repair chain); with nothing compiling, the first candidate is.
    """
    if not candidates:
        raise ValueError("no candidates to select from")
    passing = [c for c in candidates if results[c.kernel_id].passed]
    if passing:
        return min(passing, key=lambda c: results[c.kernel_id].timing.mean_latency_ms), False
    compiling = [c for c in candidates if results[c.kernel_id].compiled.passed]
    if compiling:
        return compiling[-1], True
    return candidates[0], True


def _result_to_dict(result: ReviewerResult) -> dict:
    doc: dict = {
        "compiled": {"passed": result.compiled.passed, "feedback": result.compiled.feedback},
        "correct": None,
        "mean_latency_ms": None,
        "baseline_latency_ms": result.baseline_latency_ms,
        "speedup": result.speedup,
        "raw_metrics": None,
        "run_features": None,
    }
    if result.correct is not None:
        doc["correct"] = {"passed": result.correct.passed, "feedback": result.correct.feedback}
    if result.timing is not None:
        doc["mean_latency_ms"] = result.timing.mean_latency_ms
    if result.raw_profile is not None:
        doc["raw_metrics"] = result.raw_profile.aggregate()
    if result.run_features is not None:
        doc["run_features"] = dict(result.run_features.values)
    return doc


def _candidate_to_dict(candidate: KernelCandidate) -> dict:
    return {
        "kernel_id": candidate.kernel_id,
        "source": candidate.source,
        "parent_id": candidate.parent_id,
        "produced_by": candidate.produced_by,
        "round_index": candidate.round_index,
    }


def _candidate_from_dict(doc: dict) -> KernelCandidate:
    return KernelCandidate(
        kernel_id=doc["kernel_id"],
        source=doc["source"],
        parent_id=doc.get("parent_id"),
        produced_by=doc["produced_by"],
        round_index=doc["round_index"],
    )


def render_profile_feedback(trace: DecisionTrace) -> str:
    """Deterministic plain-text summary of the evidence behind a decision."""
    lines = []
    if trace.standardized:
        fields = ", ".join(f"{k}={v:.6g}" for k, v in sorted(trace.standardized.items()))
        lines.append(f"standardized metrics: {fields}")
    derived = {k: v for k, v in sorted(trace.derived.items()) if v is not None}
    if derived:
        fields = ", ".join(f"{k}={v:.6g}" for k, v in derived.items())
        lines.append(f"derived fields: {fields}")
    if trace.tiers:
        fields = ", ".join(f"{k}={v}" for k, v in sorted(trace.tiers.items()))
        lines.append(f"headroom tiers: {fields}")
    holding = sorted(name for name, value in trace.predicates.items() if value)
    if holding:
        lines.append("predicates holding: " + ", ".join(holding))
    return "\n".join(lines) or "(no profiling evidence available)"


class Session:
    """One task's optimization run; use run_session/resume_session to drive."""

    def __init__(
        self,
        scenario: Scenario,
        config: SessionConfig,
        kb: KnowledgeBase,
        backend: ReasoningBackend,
        evaluator: Optional[EvaluationBackend] = None,
        sessions_dir: Optional[Path] = None,
        assistant=None,
    ):
        self.scenario = scenario
        self.config = config
        self.kb = kb
        self.backend = backend
        self.evaluator = evaluator or ScriptedEvaluator(scenario)
        self.log = SessionLog(sessions_dir, scenario.task_id) if sessions_dir else None
        self.assistant = assistant
        self.candidates: Dict[str, KernelCandidate] = {}
        self.evidence: Dict[str, Tuple[dict, dict]] = {}  # kernel -> (raw, run)
        self.state: Optional[SessionState] = None

    # -- shared plumbing ---------------------------------------------------

    def _evaluate(self, candidate: KernelCandidate) -> ReviewerResult:
        self.candidates[candidate.kernel_id] = candidate
        result = self.evaluator.evaluate(candidate, self.config)
        if result.passed:
            raw = result.raw_profile.aggregate() if result.raw_profile else {}
            run = dict(result.run_features.values) if result.run_features else {}
            self.evidence[candidate.kernel_id] = (raw, run)
        return result

    def _bundle(self, kernel_id: str) -> EvidenceBundle:
        raw, run = self.evidence.get(kernel_id, ({}, {}))
        code = extract_code_features(
            self.kb, self.candidates[kernel_id].source, self.assistant
        ).values
        return EvidenceBundle(raw_metrics=raw, run_features=run, code_features=code)

    def _verify_outcome(self, result: ReviewerResult) -> CheckOutcome:
        if result.correct is None:
            return CheckOutcome(False, _NOT_EVALUATED)
        return result.correct

    # -- phases ------------------------------------------------------------

    def start(self) -> None:
        batch = generate_seeds(
            self.scenario.reference, self.config.seed_count, self.backend
        )
        if not batch.candidates:
            raise SessionFault("no seed candidates survived generation")
        results = {
            c.kernel_id: self._evaluate(c) for c in batch.candidates
        }
        seed, repair_first = select_seed(batch.candidates, results)
        seed_result = results[seed.kernel_id]
        if repair_first:
            self.state = initial_state_failed_seed(
                seed.kernel_id,
                seed_result.compiled,
                self._verify_outcome(seed_result),
                rt=self.config.rt,
                at=self.config.at,
            )
        else:
            self.state = initial_state(
                seed.kernel_id, seed_result.speedup, rt=self.config.rt, at=self.config.at
            )
        if self.log:
            self.log.write_header(
                {
                    "task_id": self.scenario.task_id,
                    "level": self.scenario.level,
                    "config": self.config.to_dict(),
                    "seeds": [
                        {
                            "candidate": _candidate_to_dict(c),
                            "result": _result_to_dict(results[c.kernel_id]),
                        }
                        for c in batch.candidates
                    ],
                    "seed_reports": list(batch.reports),
                    "selected_seed": seed.kernel_id,
                    "repair_first": repair_first,
                }
            )

    def run_round(self, index: int) -> dict:
        if self.state is None:
            raise SessionFault("session not started")
        if self.state.open_chain is not None:
            doc = self._repair_round(index)
        else:
            doc = self._optimize_round(index)
        if self.log:
            self.log.write_round(index, doc)
        return doc

    def _repair_round(self, index: int) -> dict:
        state = self.state
        chain = state.open_chain
        if chain.attempts:
            tail_id = chain.attempts[-1].kernel_id
            tail_compile, tail_verify = chain.attempts[-1].compile, chain.attempts[-1].verify
        else:
            tail_id = chain.origin_kernel_id
            tail_compile, tail_verify = chain.origin_compile, chain.origin_verify
        context = repair_context(state)
        plan = diagnose(tail_compile.feedback, tail_verify.feedback, context, self.backend)
        kernel_id = f"k{index:02d}"
        try:
            candidate = apply_repair(
                plan, self.candidates[tail_id], self.backend, kernel_id, index
            )
            result = self._evaluate(candidate)
        except MalformedResponse as exc:
            candidate = KernelCandidate(kernel_id, "", tail_id, "repairer", index)
            self.candidates[kernel_id] = candidate
            result = ReviewerResult(
                compiled=CheckOutcome(False, f"agent response violated the program shell: {exc}")
            )
        return self._record(index, "repair", PlanRef(f"p{index:02d}"), candidate, result,
                            repair_plan=plan, trace=None, reports=())

    def _optimize_round(self, index: int) -> dict:
        state = self.state
        base = self.candidates[state.base_kernel_id]
        recommendation = recommend(self.kb, self._bundle(base.kernel_id))
        feedback = render_profile_feedback(recommendation.trace)
        plan, reports = plan_optimization(
            recommendation, feedback, optimization_context(state), self.backend
        )
        kernel_id = f"k{index:02d}"
        try:
            candidate = apply_optimization(plan, base, self.backend, kernel_id, index)
            result = self._evaluate(candidate)
        except MalformedResponse as exc:
            candidate = KernelCandidate(kernel_id, "", base.kernel_id, "optimizer", index)
            self.candidates[kernel_id] = candidate
            result = ReviewerResult(
                compiled=CheckOutcome(False, f"agent response violated the program shell: {exc}")
            )
        return self._record(
            index,
            "optimize",
            PlanRef(f"p{index:02d}", plan.target_method),
            candidate,
            result,
            plan_doc=plan,
            trace=recommendation.trace,
            reports=reports,
        )

    def _record(
        self,
        index: int,
        branch: str,
        plan_ref: PlanRef,
        candidate: KernelCandidate,
        result: ReviewerResult,
        plan_doc=None,
        repair_plan=None,
        trace: Optional[DecisionTrace] = None,
        reports: Tuple[str, ...] = (),
    ) -> dict:
        profile = None
        if result.passed:
            profile = ProfileOutcome(
                result.speedup,
                f"mean latency {result.timing.mean_latency_ms:.6g} ms",
            )
        record = RoundRecord(
            round_index=index,
            branch=branch,
            plan=plan_ref,
            kernel_id=candidate.kernel_id,
            compile=result.compiled,
            verify=self._verify_outcome(result),
            base_id_at_time=self.state.base_kernel_id,
            profile=profile,
        )
        record_round(self.state, record)
        promotion = None
        if result.passed:
            decision = consider_promotion(self.state, candidate.kernel_id, result.speedup)
            promotion = {"update_best": decision.update_best, "update_base": decision.update_base}
        return {
            "round_index": index,
            "branch": branch,
            "candidate": _candidate_to_dict(candidate),
            "plan": plan_doc.to_dict() if plan_doc else None,
            "repair_plan": repair_plan.to_dict() if repair_plan else None,
            "record": record.to_dict(),
            "result": _result_to_dict(result),
            "promotion": promotion,
            "trace": trace.to_dict() if trace is not None else None,
            "reports": list(reports),
        }

    def finish(self) -> SessionResult:
        state = self.state
        result = SessionResult(
            task_id=self.scenario.task_id,
            level=self.scenario.level,
            success=state.best_kernel_id is not None,
            best_kernel_id=state.best_kernel_id,
            best_speedup=state.speedup_best,
            rounds_used=state.round_counter,
            state=state,
        )
        if self.log:
            self.log.write_final(
                {
                    "task_id": result.task_id,
                    "level": result.level,
                    "success": result.success,
                    "best_kernel_id": result.best_kernel_id,
                    "speedup_best": result.best_speedup,
                    "base_kernel_id": state.base_kernel_id,
                    "speedup_base": state.speedup_base,
                    "rounds_used": result.rounds_used,
                }
            )
        return result

    # -- resume ------------------------------------------------------------

    def replay_log(self, upto: Optional[int] = None) -> None:
        """Rebuild candidates, evidence, and state from the session log."""
        if self.log is None or not self.log.exists():
            raise SessionFault("no session log to resume from")
        header = self.log.read_header()
        if header["config"] != self.config.to_dict():
            raise SessionFault("resume config differs from the logged session config")
        seed_results: Dict[str, dict] = {}
        seed_candidates = []
        for entry in header["seeds"]:
            candidate = _candidate_from_dict(entry["candidate"])
            self.candidates[candidate.kernel_id] = candidate
            seed_candidates.append(candidate)
            seed_results[candidate.kernel_id] = entry["result"]
            self._absorb_logged_evidence(candidate.kernel_id, entry["result"])
        selected = header["selected_seed"]
        seed_doc = seed_results[selected]
        if header["repair_first"]:
            correct = seed_doc["correct"]
            self.state = initial_state_failed_seed(
                selected,
                CheckOutcome(seed_doc["compiled"]["passed"], seed_doc["compiled"]["feedback"]),
                CheckOutcome(correct["passed"], correct["feedback"])
                if correct
                else CheckOutcome(False, _NOT_EVALUATED),
                rt=self.config.rt,
                at=self.config.at,
            )
        else:
            self.state = initial_state(
                selected, seed_doc["speedup"], rt=self.config.rt, at=self.config.at
            )
        for doc in self.log.read_rounds():
            if upto is not None and doc["round_index"] > upto:
                break
            candidate = _candidate_from_dict(doc["candidate"])
            self.candidates[candidate.kernel_id] = candidate
            self._absorb_logged_evidence(candidate.kernel_id, doc["result"])
            record = RoundRecord.from_dict(doc["record"])
            record_round(self.state, record)
            if record.profile is not None:
                consider_promotion(self.state, record.kernel_id, record.profile.speedup)

    def _absorb_logged_evidence(self, kernel_id: str, result_doc: dict) -> None:
        correct = result_doc.get("correct")
        if result_doc["compiled"]["passed"] and correct and correct["passed"]:
            self.evidence[kernel_id] = (
                dict(result_doc.get("raw_metrics") or {}),
                dict(result_doc.get("run_features") or {}),
            )


def run_session(
    scenario: Scenario,
    config: SessionConfig,
    kb: KnowledgeBase,
    backend: ReasoningBackend,
    evaluator: Optional[EvaluationBackend] = None,
    sessions_dir: Optional[Path] = None,
    assistant=None,
) -> SessionResult:
    """Run one task end to end: seeds, max_rounds rounds, final summary."""
    session = Session(scenario, config, kb, backend, evaluator, sessions_dir, assistant)
    session.start()
    for index in range(1, config.max_rounds + 1):
        session.run_round(index)
    return session.finish()


def resume_session(
    scenario: Scenario,
    config: SessionConfig,
    kb: KnowledgeBase,
    backend: ReasoningBackend,
    sessions_dir: Path,
    evaluator: Optional[EvaluationBackend] = None,
    assistant=None,
) -> SessionResult:
    """Pick up an interrupted session from its log and finish it."""
    session = Session(scenario, config, kb, backend, evaluator, sessions_dir, assistant)
    session.replay_log()
    for index in range(session.state.round_counter + 1, config.max_rounds + 1):
        session.run_round(index)
    return session.finish()


def compute_metrics(results: Sequence[SessionResult], max_rounds: int) -> MetricsReport:
    """Benchmark metrics over a task set; failed tasks contribute speedup 0."""
    if not results:
        raise ValueError("no session results to aggregate")
    n = len(results)
    successes = sum(1 for r in results if r.success)
    speedups = [r.best_speedup if r.success else 0.0 for r in results]
    mean_speedup = sum(speedups) / n
    fast1 = sum(1 for s in speedups if s >= 1.0) / n
    return MetricsReport(
        success_rate=successes / n,
        mean_speedup=mean_speedup,
        fast1=fast1,
        per_round_efficiency=mean_speedup / max_rounds,
    )


def metrics_by_level(
    results: Sequence[SessionResult], max_rounds: int
) -> Dict[int, MetricsReport]:
    levels: Dict[int, List[SessionResult]] = {}
    for result in results:
        levels.setdefault(result.level, []).append(result)
    return {
        level: compute_metrics(group, max_rounds)
        for level, group in sorted(levels.items())
    }
