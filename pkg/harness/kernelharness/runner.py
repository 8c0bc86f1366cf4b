"""Evaluate one candidate kernel: build, verify, time, optionally profile.

The candidate module must define ``ModelNew``; the reference module defines
``Model``, ``get_inputs()``, and ``get_init_inputs()``. Both are executed
in fresh module namespaces. Every failure mode lands in response fields;
this module never lets a kernel problem escape as an exception.

Real measurements want a CUDA device (event-based timing). Without one the
runner falls back to CPU execution with wall-clock timing so the full
pipeline stays exercisable on development machines; deployment is expected
to be CUDA.
"""

import hashlib
import time
import traceback
import types
from typing import Dict, List, Optional, Tuple

import torch

from .profilers import collect_ncu, collect_nsys
from .protocol import RequestConfig, request_config, response_doc

_INIT_SEED = 0
_TRIAL_SEED = 1000


def _load_module(source: str, name: str) -> types.ModuleType:
    module = types.ModuleType(name)
    code = compile(source, f"<{name}>", "exec")
    exec(code, module.__dict__)
    return module


def _tail(limit: int = 4000) -> str:
    return traceback.format_exc()[-limit:]


def _resolve_device(index: int) -> torch.device:
    if torch.cuda.is_available():
        return torch.device(f"cuda:{index}")
    return torch.device("cpu")


def _to_device(values, device) -> list:
    return [v.to(device) if torch.is_tensor(v) else v for v in values]


def _flatten(output) -> List[torch.Tensor]:
    if torch.is_tensor(output):
        return [output]
    if isinstance(output, (list, tuple)):
        flat: List[torch.Tensor] = []
        for item in output:
            flat.extend(_flatten(item))
        return flat
    return []


def _compare(got, want, atol: float, rtol: float) -> Tuple[bool, str]:
    got_t, want_t = _flatten(got), _flatten(want)
    if len(got_t) != len(want_t):
        return False, f"output arity {len(got_t)} != reference {len(want_t)}"
    for i, (g, w) in enumerate(zip(got_t, want_t)):
        if g.shape != w.shape:
            return False, f"output {i} shape {tuple(g.shape)} != {tuple(w.shape)}"
        if not torch.allclose(g.to(w.dtype), w, atol=atol, rtol=rtol):
            deviation = (g.to(w.dtype) - w).abs().max().item()
            return False, (
                f"output {i} max abs diff {deviation:.3e} exceeds "
                f"tolerance (abs {atol:g}, rel {rtol:g})"
            )
    return True, ""


def _time_forward(model, inputs, warmup: int, iters: int, device) -> float:
    """Mean forward latency in milliseconds over `iters` timed iterations."""
    with torch.no_grad():
        for _ in range(warmup):
            model(*inputs)
        if device.type == "cuda":
            torch.cuda.synchronize(device)
            start = torch.cuda.Event(enable_timing=True)
            end = torch.cuda.Event(enable_timing=True)
            start.record()
            for _ in range(iters):
                model(*inputs)
            end.record()
            torch.cuda.synchronize(device)
            return start.elapsed_time(end) / iters
        t0 = time.perf_counter()
        for _ in range(iters):
            model(*inputs)
        return (time.perf_counter() - t0) * 1000.0 / iters


class Runner:
    """Stateful evaluator: caches reference modules and baseline timings."""

    def __init__(self):
        self._references: Dict[str, Tuple[types.ModuleType, torch.nn.Module]] = {}
        self._baselines: Dict[Tuple[str, int, int, str], float] = {}

    # --- reference side -----------------------------------------------------

    def _reference(self, source: str, device) -> Tuple[types.ModuleType, torch.nn.Module]:
        key = hashlib.sha256(source.encode()).hexdigest() + "/" + str(device)
        if key not in self._references:
            module = _load_module(source, "reference")
            torch.manual_seed(_INIT_SEED)
            model = module.Model(*self._init_args(module)).to(device)
            model.eval()
            self._references[key] = (module, model)
        return self._references[key]

    @staticmethod
    def _init_args(ref_module) -> list:
        getter = getattr(ref_module, "get_init_inputs", None)
        return list(getter()) if getter else []

    def _baseline(self, source: str, ref_model, inputs, config: RequestConfig,
                  device) -> float:
        key = (
            hashlib.sha256(source.encode()).hexdigest(),
            config.warmup,
            config.iters,
            str(device),
        )
        if key not in self._baselines:
            self._baselines[key] = _time_forward(
                ref_model, inputs, config.warmup, config.iters, device
            )
        return self._baselines[key]

    # --- candidate side -----------------------------------------------------

    def _build_candidate(self, source: str, ref_module, device):
        module = _load_module(source, "candidate")
        torch.manual_seed(_INIT_SEED)
        model = module.ModelNew(*self._init_args(ref_module)).to(device)
        model.eval()
        return model

    def _verify(self, ref_model, model, ref_module, config: RequestConfig,
                device) -> Tuple[bool, str]:
        for trial in range(config.trials):
            torch.manual_seed(_TRIAL_SEED + trial)
            inputs = _to_device(ref_module.get_inputs(), device)
            with torch.no_grad():
                want = ref_model(*inputs)
                got = model(*inputs)
            close, detail = _compare(
                got, want, config.tolerance_abs, config.tolerance_rel
            )
            if not close:
                return False, f"trial {trial + 1}/{config.trials}: {detail}"
        return True, f"{config.trials}/{config.trials} trials within tolerance"

    # --- entry point --------------------------------------------------------

    def evaluate(self, request: dict) -> dict:
        config = request_config(request)
        kernel_id = request.get("kernel_id")
        device = _resolve_device(config.device)

        try:
            ref_module, ref_model = self._reference(
                request["reference_source"], device
            )
        except Exception:
            return response_doc(
                kernel_id, compiled=False,
                compile_log=f"reference module failed:\n{_tail()}",
            )

        try:
            model = self._build_candidate(
                request["kernel_source"], ref_module, device
            )
        except Exception:
            return response_doc(kernel_id, compiled=False, compile_log=_tail())

        try:
            correct, verify_log = self._verify(
                ref_model, model, ref_module, config, device
            )
        except Exception:
            correct, verify_log = False, f"verification crashed:\n{_tail()}"
        if not correct:
            return response_doc(
                kernel_id, compiled=True, correct=False, verify_log=verify_log
            )

        try:
            torch.manual_seed(_TRIAL_SEED)
            inputs = _to_device(ref_module.get_inputs(), device)
            baseline = self._baseline(
                request["reference_source"], ref_model, inputs, config, device
            )
            mean = _time_forward(model, inputs, config.warmup, config.iters, device)
        except Exception:
            return response_doc(
                kernel_id, compiled=True, correct=False,
                verify_log=verify_log + f"\ntiming loop crashed:\n{_tail()}",
            )

        ncu_csv = nsys_summary = None
        if config.profile:
            ncu_csv = collect_ncu(
                request["kernel_source"], request["reference_source"], config
            )
            nsys_summary = collect_nsys(
                request["kernel_source"], request["reference_source"], config
            )

        return response_doc(
            kernel_id,
            compiled=True,
            correct=True,
            verify_log=verify_log,
            mean_latency_ms=mean,
            baseline_latency_ms=baseline,
            speedup=baseline / mean if mean > 0 else None,
            ncu_csv=ncu_csv,
            nsys_summary=nsys_summary,
        )
