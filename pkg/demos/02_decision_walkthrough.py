"""Walk one piece of profiling evidence through the decision engine.

The engine never guesses: raw metrics are standardized, derived fields and
tier labels are computed, predicates fire or do not, bottleneck candidates
are ranked, and the decision table is walked case by case. Every step lands
in the trace, so the final method list can be audited line by line.
"""

from kernelsmith.engine import EvidenceBundle, recommend
from kernelsmith.knowledge import load_default_kb

kb = load_default_kb()

# a bandwidth-starved kernel: DRAM nearly saturated, SMs idling,
# no shared-memory staging in the source yet
evidence = EvidenceBundle(
    raw_metrics={
        "gpu__time_duration.sum": 4.2e6,
        "dram__throughput.avg.pct_of_peak_sustained_elapsed": 88.0,
        "sm__throughput.avg.pct_of_peak_sustained_elapsed": 22.0,
        "sm__warps_active.avg.pct_of_peak_sustained_active": 61.0,
        "lts__t_sector_hit_rate.pct": 55.0,
    },
    run_features={"kernel_launch_count": 12, "total_gpu_time_ms": 4.2},
    code_features={
        "uses_shared_memory": False,
        "precision_mode": "fp32",
        "memory_access_pattern": "coalesced",
        "reduction_pattern_present": False,
        "uses_atomics": False,
    },
)

rec = recommend(kb, evidence)
trace = rec.trace

print("standardized fields:")
for name, value in sorted(trace.standardized.items()):
    print(f"  {name} = {value}")

print("derived fields:")
for name, value in sorted(trace.derived.items()):
    print(f"  {name} = {value}")

print("headroom tiers: " + ", ".join(
    f"{k}={v}" for k, v in sorted(trace.tiers.items())))

holding = sorted(name for name, held in trace.predicates.items() if held)
print("predicates holding: " + ", ".join(holding))

print("bottleneck candidates (ranked): " + ", ".join(trace.bottleneck_candidates))

print("decision-table walk:")
for step in trace.walk:
    case = step.case_id or "-"
    print(f"  {step.bottleneck_type} / {case}: {step.outcome}")

if rec.fallback:
    print("no case matched; the planner gets a free hand this round")
else:
    print(f"matched case {trace.matched_case_id} ({trace.matched_bottleneck})")
    print("recommended methods, best first:")
    for method in rec.methods:
        entry = next(m for m in kb.methods if m.method_id == method)
        print(f"  {method}: {entry.rationale}")
