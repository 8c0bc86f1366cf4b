"""Reviewer-side evaluation: compile/verify/time a candidate kernel.

Two interchangeable backends drive the session loop:

    ScriptedEvaluator    deterministic outcomes from a scenario document,
                         keyed by kernel id; no GPU, no subprocess.  This is
                         what tests and replay run on.
    SubprocessEvaluator  client for the real harness, a long-lived child
                         process speaking line-delimited JSON on its
                         standard streams (one request line in, one
                         response line out).

Both produce ReviewerResult with the same gating: correctness is only
evaluated for candidates that compiled, and timing/speedup/profile data
exist only for candidates that passed both checks.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .agents import KernelCandidate
from .errors import MalformedDocument, MalformedResponse, SessionFault
from .profiling import KernelProfile, RawProfile, RunFeatures, parse_ncu_csv, parse_nsys_summary
from .trajectory import CheckOutcome

PROTOCOL_VERSION = "1"


@dataclass(frozen=True)
class TimingResult:
    mean_latency_ms: float
    warmup: int
    iters: int


@dataclass(frozen=True)
class ReviewerResult:
    compiled: CheckOutcome
    correct: Optional[CheckOutcome] = None  # None until compile passes
    timing: Optional[TimingResult] = None
    baseline_latency_ms: Optional[float] = None
    speedup: Optional[float] = None
    raw_profile: Optional[RawProfile] = None
    run_features: Optional[RunFeatures] = None

    @property
    def passed(self) -> bool:
        return self.compiled.passed and self.correct is not None and self.correct.passed


class EvaluationBackend:
    """Interface: evaluate(candidate, config) -> ReviewerResult."""

    def evaluate(self, candidate: KernelCandidate, config) -> ReviewerResult:
        raise NotImplementedError

    def close(self) -> None:
        pass


# --- scripted scenarios ----------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """One task's scripted world: reference program plus canned outcomes."""

    task_id: str
    level: int
    reference: str
    baseline_latency_ms: float
    evaluations: Dict[str, dict]
    default: Optional[dict] = None
    origin: str = "<scenario>"


def load_scenario(path: Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedDocument(str(path), f"invalid JSON: {exc}") from exc
    for key in ("task_id", "reference", "baseline_latency_ms", "evaluations"):
        if key not in doc:
            raise MalformedDocument(str(path), f"scenario lacks {key!r}")
    return Scenario(
        task_id=doc["task_id"],
        level=int(doc.get("level", 1)),
        reference=doc["reference"],
        baseline_latency_ms=float(doc["baseline_latency_ms"]),
        evaluations=dict(doc["evaluations"]),
        default=doc.get("default"),
        origin=str(path),
    )


def profile_from_metrics(
    metrics: Dict[str, float], units: Optional[Dict[str, str]] = None
) -> RawProfile:
    """Wrap a flat metric dict as a single-kernel profile."""
    units = dict(units or {})
    for name in metrics:
        units.setdefault(name, "%" if name.endswith("pct") or ".pct" in name else "")
    kernel = KernelProfile(
        kernel_name="scripted",
        launch_count=1,
        metrics={k: float(v) for k, v in metrics.items()},
        units=units,
        metric_lines={k: () for k in metrics},
    )
    return RawProfile(kernels=(kernel,), skipped=())


class ScriptedEvaluator(EvaluationBackend):
    """Deterministic evaluation from a scenario document."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    def evaluate(self, candidate: KernelCandidate, config=None) -> ReviewerResult:
        spec = self.scenario.evaluations.get(candidate.kernel_id)
        if spec is None:
            spec = self.scenario.default
        if spec is None:
            return ReviewerResult(
                compiled=CheckOutcome(
                    False, f"no scripted outcome for kernel {candidate.kernel_id!r}"
                )
            )
        compiled = CheckOutcome(
            bool(spec.get("compile", False)), spec.get("compile_feedback", "")
        )
        if not compiled.passed:
            return ReviewerResult(compiled=compiled)
        correct = CheckOutcome(
            bool(spec.get("verify", False)), spec.get("verify_feedback", "")
        )
        if not correct.passed:
            return ReviewerResult(compiled=compiled, correct=correct)
        latency = float(spec["latency_ms"])
        baseline = self.scenario.baseline_latency_ms
        raw_profile = None
        run_features = None
        if "raw_metrics" in spec:
            raw_profile = profile_from_metrics(
                spec["raw_metrics"], spec.get("metric_units")
            )
        if "run_features" in spec:
            run_features = RunFeatures(values=dict(spec["run_features"]), skipped=())
        return ReviewerResult(
            compiled=compiled,
            correct=correct,
            timing=TimingResult(mean_latency_ms=latency, warmup=25, iters=100),
            baseline_latency_ms=baseline,
            speedup=baseline / latency,
            raw_profile=raw_profile,
            run_features=run_features,
        )


# --- wire protocol client --------------------------------------------------

_RESPONSE_REQUIRED = ("protocol", "compiled", "compile_log")


def validate_response(doc: object) -> List[str]:
    """Structural problems in a harness response document; empty means valid."""
    problems: List[str] = []
    if not isinstance(doc, dict):
        return ["response is not an object"]
    for key in _RESPONSE_REQUIRED:
        if key not in doc:
            problems.append(f"missing field {key!r}")
    if doc.get("protocol") not in (PROTOCOL_VERSION,):
        problems.append(f"unsupported protocol version {doc.get('protocol')!r}")
    if not isinstance(doc.get("compiled"), bool):
        problems.append("compiled must be boolean")
    if doc.get("compiled"):
        if not isinstance(doc.get("correct"), bool):
            problems.append("correct must be boolean once compiled")
        if doc.get("correct") and not isinstance(
            doc.get("mean_latency_ms"), (int, float)
        ):
            problems.append("mean_latency_ms required for correct kernels")
    else:
        if doc.get("correct") is not None:
            problems.append("correct must be null when compilation failed")
    for key in ("mean_latency_ms", "baseline_latency_ms", "speedup"):
        value = doc.get(key)
        if value is not None and not isinstance(value, (int, float)):
            problems.append(f"{key} must be numeric or null")
    return problems


@dataclass
class HarnessConfig:
    warmup: int = 25
    iters: int = 100
    tolerance_abs: float = 1e-2
    tolerance_rel: float = 1e-2
    trials: int = 5
    profile: bool = False
    device: int = 0


class SubprocessEvaluator(EvaluationBackend):
    """Evaluate through the external harness over its stdio protocol."""

    def __init__(self, command: Sequence[str], reference_source: str,
                 config: Optional[HarnessConfig] = None):
        self.command = list(command)
        self.reference_source = reference_source
        self.config = config or HarnessConfig()
        self._proc: Optional[subprocess.Popen] = None

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise SessionFault(f"cannot start harness {self.command!r}: {exc}") from exc
        return self._proc

    def evaluate(self, candidate: KernelCandidate, config=None) -> ReviewerResult:
        request = {
            "protocol": PROTOCOL_VERSION,
            "action": "evaluate",
            "kernel_id": candidate.kernel_id,
            "kernel_source": candidate.source,
            "reference_source": self.reference_source,
            "config": {
                "warmup": self.config.warmup,
                "iters": self.config.iters,
                "tolerance_abs": self.config.tolerance_abs,
                "tolerance_rel": self.config.tolerance_rel,
                "trials": self.config.trials,
                "profile": self.config.profile,
                "device": self.config.device,
            },
        }
        proc = self._ensure_process()
        try:
            proc.stdin.write(json.dumps(request) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise SessionFault(f"harness pipe broke: {exc}") from exc
        if not line:
            raise SessionFault("harness closed its output stream")
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"harness emitted invalid JSON: {exc}") from exc
        problems = validate_response(doc)
        if problems:
            raise MalformedResponse("harness response invalid: " + "; ".join(problems))
        return self._to_result(doc)

    def _to_result(self, doc: dict) -> ReviewerResult:
        compiled = CheckOutcome(doc["compiled"], doc.get("compile_log", ""))
        if not compiled.passed:
            return ReviewerResult(compiled=compiled)
        correct = CheckOutcome(bool(doc.get("correct")), doc.get("verify_log", ""))
        if not correct.passed:
            return ReviewerResult(compiled=compiled, correct=correct)
        timing = TimingResult(
            mean_latency_ms=float(doc["mean_latency_ms"]),
            warmup=self.config.warmup,
            iters=self.config.iters,
        )
        raw_profile = None
        run_features = None
        if doc.get("ncu_csv"):
            raw_profile = parse_ncu_csv(doc["ncu_csv"], what="<harness ncu>")
        if doc.get("nsys_summary"):
            run_features = parse_nsys_summary(doc["nsys_summary"], what="<harness nsys>")
        return ReviewerResult(
            compiled=compiled,
            correct=correct,
            timing=timing,
            baseline_latency_ms=doc.get("baseline_latency_ms"),
            speedup=doc.get("speedup"),
            raw_profile=raw_profile,
            run_features=run_features,
        )

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
        self._proc = None
