"""Request validation and response shaping for the stdio wire protocol.

One JSON document per line in each direction. Kernel failures are encoded
in response fields; only a request the harness cannot understand yields an
error document instead of an evaluation response.
"""

from dataclasses import dataclass
from typing import List, Optional

PROTOCOL_VERSION = "1"


@dataclass(frozen=True)
class RequestConfig:
    warmup: int = 25
    iters: int = 100
    tolerance_abs: float = 1e-2
    tolerance_rel: float = 1e-2
    trials: int = 5
    profile: bool = False
    device: int = 0


def validate_request(doc: object) -> List[str]:
    """Structural problems in a request document; empty means acceptable."""
    problems: List[str] = []
    if not isinstance(doc, dict):
        return ["request is not an object"]
    if doc.get("protocol") != PROTOCOL_VERSION:
        problems.append(f"unsupported protocol version {doc.get('protocol')!r}")
    if doc.get("action") != "evaluate":
        problems.append(f"unknown action {doc.get('action')!r}")
    for key in ("kernel_source", "reference_source"):
        if not isinstance(doc.get(key), str) or not doc.get(key).strip():
            problems.append(f"{key} must be a non-empty string")
    kid = doc.get("kernel_id")
    if kid is not None and not isinstance(kid, str):
        problems.append("kernel_id must be a string when present")
    config = doc.get("config", {})
    if not isinstance(config, dict):
        problems.append("config must be an object")
        return problems
    for key in ("warmup", "iters", "trials"):
        value = config.get(key)
        if value is not None and (not isinstance(value, int) or value < 1):
            problems.append(f"config.{key} must be an integer >= 1")
    for key in ("tolerance_abs", "tolerance_rel"):
        value = config.get(key)
        if value is not None and (
            not isinstance(value, (int, float)) or value <= 0
        ):
            problems.append(f"config.{key} must be > 0")
    if "profile" in config and not isinstance(config["profile"], bool):
        problems.append("config.profile must be boolean")
    device = config.get("device")
    if device is not None and (not isinstance(device, int) or device < 0):
        problems.append("config.device must be an integer >= 0")
    return problems


def request_config(doc: dict) -> RequestConfig:
    """Config with defaults filled in; call only after validate_request."""
    config = doc.get("config", {})
    defaults = RequestConfig()
    return RequestConfig(
        warmup=config.get("warmup", defaults.warmup),
        iters=config.get("iters", defaults.iters),
        tolerance_abs=float(config.get("tolerance_abs", defaults.tolerance_abs)),
        tolerance_rel=float(config.get("tolerance_rel", defaults.tolerance_rel)),
        trials=config.get("trials", defaults.trials),
        profile=config.get("profile", defaults.profile),
        device=config.get("device", defaults.device),
    )


def response_doc(
    kernel_id: Optional[str],
    compiled: bool,
    compile_log: str = "",
    correct: Optional[bool] = None,
    verify_log: str = "",
    mean_latency_ms: Optional[float] = None,
    baseline_latency_ms: Optional[float] = None,
    speedup: Optional[float] = None,
    ncu_csv: Optional[str] = None,
    nsys_summary: Optional[str] = None,
) -> dict:
    # gating invariants are enforced here so no caller can ship an
    # inconsistent document: no verdict without compile, no numbers
    # without a correct kernel
    if not compiled:
        correct = None
        mean_latency_ms = speedup = None
    if not correct:
        mean_latency_ms = speedup = None
        ncu_csv = nsys_summary = None
    return {
        "protocol": PROTOCOL_VERSION,
        "kernel_id": kernel_id,
        "compiled": compiled,
        "compile_log": compile_log,
        "correct": correct,
        "verify_log": verify_log,
        "mean_latency_ms": mean_latency_ms,
        "baseline_latency_ms": baseline_latency_ms,
        "speedup": speedup,
        "ncu_csv": ncu_csv,
        "nsys_summary": nsys_summary,
    }


def error_doc(detail: str, kernel_id: Optional[str] = None) -> dict:
    return {"protocol": PROTOCOL_VERSION, "kernel_id": kernel_id, "error": detail}
