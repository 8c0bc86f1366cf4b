"""Invoke Nsight Compute and Nsight Systems around a candidate kernel.

Both collectors are best-effort: a missing tool, a non-zero exit, or a
timeout yields None, never an exception. The raw text output travels back
over the wire untouched; parsing it is the caller's business.
"""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path
from typing import Optional

from .protocol import RequestConfig

# a stable, broadly available metric set; ncu ignores metrics a given
# chip cannot provide
NCU_METRICS = [
    "gpu__time_duration.sum",
    "dram__throughput.avg.pct_of_peak_sustained_elapsed",
    "sm__throughput.avg.pct_of_peak_sustained_elapsed",
    "sm__warps_active.avg.pct_of_peak_sustained_active",
    "l1tex__t_sector_hit_rate.pct",
    "lts__t_sector_hit_rate.pct",
    "launch__registers_per_thread",
    "smsp__warp_issue_stalled_long_scoreboard_per_warp_active.pct",
    "smsp__warp_issue_stalled_barrier_per_warp_active.pct",
    "dram__bytes.sum",
    "sm__pipe_tensor_cycles_active.avg.pct_of_peak_sustained_elapsed",
]

_PROFILE_ITERS = 10
_TIMEOUT_S = 600

_RUNNER_SCRIPT = """\
import torch

ref_ns, new_ns = {{}}, {{}}
with open({ref_path!r}) as fh:
    exec(compile(fh.read(), "<reference>", "exec"), ref_ns)
with open({kernel_path!r}) as fh:
    exec(compile(fh.read(), "<candidate>", "exec"), new_ns)

device = torch.device("cuda:{device}" if torch.cuda.is_available() else "cpu")
init = list(ref_ns["get_init_inputs"]()) if "get_init_inputs" in ref_ns else []
torch.manual_seed(0)
model = new_ns["ModelNew"](*init).to(device).eval()
torch.manual_seed(1000)
inputs = [x.to(device) if torch.is_tensor(x) else x for x in ref_ns["get_inputs"]()]
with torch.no_grad():
    for _ in range({iters}):
        model(*inputs)
if torch.cuda.is_available():
    torch.cuda.synchronize()
"""


def _write_workload(tmp: Path, kernel_source: str, reference_source: str,
                    config: RequestConfig) -> Path:
    ref_path = tmp / "reference.py"
    kernel_path = tmp / "candidate.py"
    ref_path.write_text(reference_source)
    kernel_path.write_text(kernel_source)
    script = tmp / "workload.py"
    script.write_text(
        _RUNNER_SCRIPT.format(
            ref_path=str(ref_path),
            kernel_path=str(kernel_path),
            device=config.device,
            iters=_PROFILE_ITERS,
        )
    )
    return script


def _run(cmd, cwd: Path) -> Optional[subprocess.CompletedProcess]:
    try:
        return subprocess.run(
            cmd, cwd=cwd, capture_output=True, text=True, timeout=_TIMEOUT_S
        )
    except (OSError, subprocess.TimeoutExpired):
        return None


def collect_ncu(kernel_source: str, reference_source: str,
                config: RequestConfig) -> Optional[str]:
    if shutil.which("ncu") is None:
        return None
    with tempfile.TemporaryDirectory(prefix="kernelharness-ncu-") as tmp:
        tmp_path = Path(tmp)
        script = _write_workload(tmp_path, kernel_source, reference_source, config)
        proc = _run(
            [
                "ncu", "--csv", "--metrics", ",".join(NCU_METRICS),
                "--target-processes", "all",
                sys.executable, str(script),
            ],
            tmp_path,
        )
    if proc is None or proc.returncode != 0 or not proc.stdout.strip():
        return None
    return proc.stdout


def collect_nsys(kernel_source: str, reference_source: str,
                 config: RequestConfig) -> Optional[str]:
    if shutil.which("nsys") is None:
        return None
    with tempfile.TemporaryDirectory(prefix="kernelharness-nsys-") as tmp:
        tmp_path = Path(tmp)
        script = _write_workload(tmp_path, kernel_source, reference_source, config)
        trace = tmp_path / "trace"
        proc = _run(
            [
                "nsys", "profile", "--output", str(trace),
                "--force-overwrite", "true",
                sys.executable, str(script),
            ],
            tmp_path,
        )
        if proc is None or proc.returncode != 0:
            return None
        report = _run(
            [
                "nsys", "stats", "--report", "cuda_gpu_kern_sum",
                "--format", "csv", f"{trace}.nsys-rep",
            ],
            tmp_path,
        )
    if report is None or report.returncode != 0 or not report.stdout.strip():
        return None
    return report.stdout
