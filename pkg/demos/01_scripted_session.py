"""One full optimization session, told round by round.

Everything here runs offline: the agent backend synthesizes candidates from
role prompts and the evaluator replays canned outcomes from a scenario
document, so the whole closed loop (generate seeds, pick a base, optimize,
repair, promote) is reproducible to the byte.
"""

import tempfile
from pathlib import Path

from kernelsmith.backends import ScriptedBackend
from kernelsmith.evaluation import load_scenario
from kernelsmith.knowledge import load_default_kb
from kernelsmith.orchestrator import SessionConfig, run_session
from kernelsmith.sessionlog import SessionLog

ROOT = Path(__file__).resolve().parent.parent
scenario = load_scenario(ROOT / "fixtures" / "scenarios" / "s01_steady_climb.json")
kb = load_default_kb()
config = SessionConfig(max_rounds=6, seed_count=3)

print(f"task {scenario.task_id!r} (level {scenario.level}), "
      f"baseline {scenario.baseline_latency_ms} ms, {config.max_rounds} rounds")

with tempfile.TemporaryDirectory() as tmp:
    result = run_session(
        scenario, config, kb, ScriptedBackend(), sessions_dir=tmp
    )
    log = SessionLog(tmp, scenario.task_id)

    header = log.read_header()
    for seed in header["seeds"]:
        r = seed["result"]
        verdict = f"{r['speedup']:.3f}x" if r["speedup"] else "failed"
        print(f"  seed {seed['candidate']['kernel_id']}: {verdict}")
    print(f"selected seed: {header['selected_seed']} "
          f"(repair first: {header['repair_first']})")

    for doc in log.read_rounds():
        kid = doc["candidate"]["kernel_id"]
        r = doc["result"]
        if doc["branch"] == "optimize":
            what = f"tried {doc['plan']['target_method'] or 'a free-form rewrite'}"
        else:
            what = f"repaired {doc['candidate']['parent_id']}"
        if not r["compiled"]["passed"]:
            outcome = f"did not compile ({r['compiled']['feedback']})"
        elif not r["correct"]["passed"]:
            outcome = "wrong output"
        else:
            outcome = f"{r['speedup']:.3f}x"
        line = f"  round {doc['round_index']} [{doc['branch']}] {kid}: {what} -> {outcome}"
        if doc["promotion"]:
            tags = [k for k, v in doc["promotion"].items() if v]
            if tags:
                line += f"  ({', '.join(tags)})"
        print(line)

print(f"finished: success={result.success} best={result.best_kernel_id} "
      f"at {result.best_speedup:.3f}x over {result.rounds_used} rounds")
