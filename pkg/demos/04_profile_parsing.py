"""Parse real-shaped profiler exports, including the rotten lines.

Profiler CSV in the wild carries grouped thousands separators, stray units,
truncated rows, and duplicate metric entries. The parsers keep every
recoverable number, skip the rest, and report each skipped line with its
line number, so nothing is silently invented.
"""

from pathlib import Path

from kernelsmith.profiling import parse_ncu_csv, parse_nsys_summary

PROFILES = Path(__file__).resolve().parent.parent / "fixtures" / "profiles"

text = (PROFILES / "ncu_faults.csv").read_text()
profile = parse_ncu_csv(text)

print(f"ncu_faults.csv: {len(profile.kernels)} kernels")
for kernel in profile.kernels:
    print(f"  {kernel.kernel_name} ({kernel.launch_count} launches)")
    for metric, value in sorted(kernel.metrics.items()):
        print(f"    {metric} = {value:g} {kernel.units[metric]}")

print("aggregate view (duration-weighted percentages, summed counters):")
for metric, value in sorted(profile.aggregate().items()):
    print(f"  {metric} = {value:g}")

print(f"skipped {len(profile.skipped)} lines:")
for fault in profile.skipped:
    print(f"  line {fault.line}: {fault.detail}")

print()
run = parse_nsys_summary((PROFILES / "nsys_simple.csv").read_text())
print("nsys_simple.csv run-level features:")
for name, value in sorted(run.values.items()):
    print(f"  {name} = {value:g}")
