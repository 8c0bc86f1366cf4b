"""Short-term memory for one optimization session.

Holds everything a session learns as it goes: the per-round records, repair
chains (a failing kernel plus the attempts to fix it), per-base histories
of optimization methods already tried, and the base/best bookkeeping with
its promotion thresholds.

Two context renderings feed the reasoning roles: the open repair chain for
the diagnoser, and the current base's method history for the planner.  Both
are pure functions of the state.

Promotion follows the dual-threshold rule: a new kernel replaces the base
when its speedup beats the base's by more than the relative threshold
(ratio > 1 + rt) or by more than the absolute threshold (difference > at),
both strict.  The best kernel tracks the global maximum instead, so a
base promotion can never silently discard the fastest kernel seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .errors import NoOpenChain, SequenceViolation

BRANCHES = ("repair", "optimize")


@dataclass(frozen=True)
class CheckOutcome:
    passed: bool
    feedback: str = ""


@dataclass(frozen=True)
class ProfileOutcome:
    speedup: float
    summary: str = ""


@dataclass(frozen=True)
class PlanRef:
    """Pointer to the plan a round executed; method None means fallback."""

    plan_id: str
    method: Optional[str] = None

    def to_dict(self) -> dict:
        return {"plan_id": self.plan_id, "method": self.method}

    @staticmethod
    def from_dict(doc: dict) -> "PlanRef":
        return PlanRef(plan_id=doc["plan_id"], method=doc.get("method"))


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    branch: str  # "repair" | "optimize"
    plan: PlanRef
    kernel_id: str
    compile: CheckOutcome
    verify: CheckOutcome
    base_id_at_time: str
    profile: Optional[ProfileOutcome] = None

    @property
    def passed(self) -> bool:
        return self.compile.passed and self.verify.passed

    def to_dict(self) -> dict:
        doc = {
            "round_index": self.round_index,
            "branch": self.branch,
            "plan": self.plan.to_dict(),
            "kernel_id": self.kernel_id,
            "compile": {"passed": self.compile.passed, "feedback": self.compile.feedback},
            "verify": {"passed": self.verify.passed, "feedback": self.verify.feedback},
            "base_id_at_time": self.base_id_at_time,
            "profile": None,
        }
        if self.profile is not None:
            doc["profile"] = {
                "speedup": self.profile.speedup,
                "summary": self.profile.summary,
            }
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "RoundRecord":
        profile = doc.get("profile")
        return RoundRecord(
            round_index=doc["round_index"],
            branch=doc["branch"],
            plan=PlanRef.from_dict(doc["plan"]),
            kernel_id=doc["kernel_id"],
            compile=CheckOutcome(doc["compile"]["passed"], doc["compile"].get("feedback", "")),
            verify=CheckOutcome(doc["verify"]["passed"], doc["verify"].get("feedback", "")),
            base_id_at_time=doc["base_id_at_time"],
            profile=ProfileOutcome(profile["speedup"], profile.get("summary", ""))
            if profile
            else None,
        )


@dataclass(frozen=True)
class RepairAttempt:
    plan: PlanRef
    kernel_id: str
    compile: CheckOutcome
    verify: CheckOutcome

    @property
    def passed(self) -> bool:
        return self.compile.passed and self.verify.passed


@dataclass
class RepairChain:
    """A failing kernel and the ordered attempts to restore correctness."""

    origin_kernel_id: str
    origin_compile: CheckOutcome
    origin_verify: CheckOutcome
    attempts: List[RepairAttempt] = field(default_factory=list)
    open: bool = True


@dataclass(frozen=True)
class HistoryEntry:
    method: Optional[str]  # None = fallback plan
    plan_id: str
    speedup: Optional[float]
    failed_stage: Optional[str] = None  # "compile" | "verify" when speedup is None


@dataclass
class OptimizationHistory:
    base_kernel_id: str
    entries: List[HistoryEntry] = field(default_factory=list)


@dataclass(frozen=True)
class PromotionDecision:
    update_best: bool
    update_base: bool


@dataclass
class SessionState:
    base_kernel_id: str
    best_kernel_id: Optional[str]
    speedup_base: float
    speedup_best: float
    rt: float
    at: float
    round_counter: int = 0
    rounds: List[RoundRecord] = field(default_factory=list)
    chains: List[RepairChain] = field(default_factory=list)
    histories: Dict[str, OptimizationHistory] = field(default_factory=dict)

    @property
    def open_chain(self) -> Optional[RepairChain]:
        for chain in self.chains:
            if chain.open:
                return chain
        return None


def initial_state(seed_kernel_id: str, seed_speedup: float, rt: float, at: float) -> SessionState:
    """Session start from a seed that passed both checks."""
    state = SessionState(
        base_kernel_id=seed_kernel_id,
        best_kernel_id=seed_kernel_id,
        speedup_base=seed_speedup,
        speedup_best=seed_speedup,
        rt=rt,
        at=at,
    )
    state.histories[seed_kernel_id] = OptimizationHistory(seed_kernel_id)
    return state


def initial_state_failed_seed(
    seed_kernel_id: str,
    compile_outcome: CheckOutcome,
    verify_outcome: CheckOutcome,
    rt: float,
    at: float,
) -> SessionState:
    """Session start from a seed that failed; opens the repair chain at it."""
    if compile_outcome.passed and verify_outcome.passed:
        raise ValueError("seed passed both checks; use initial_state")
    state = SessionState(
        base_kernel_id=seed_kernel_id,
        best_kernel_id=None,
        speedup_base=0.0,
        speedup_best=0.0,
        rt=rt,
        at=at,
    )
    state.histories[seed_kernel_id] = OptimizationHistory(seed_kernel_id)
    state.chains.append(
        RepairChain(
            origin_kernel_id=seed_kernel_id,
            origin_compile=compile_outcome,
            origin_verify=verify_outcome,
        )
    )
    return state


def record_round(state: SessionState, record: RoundRecord) -> SessionState:
    """Append one round and update chains and histories accordingly.

    An optimize round that fails opens a new repair chain at the produced
    kernel; a repair round extends the open chain and closes it when the
    attempt passes both checks.
    """
    if record.round_index != state.round_counter + 1:
        raise SequenceViolation(
            f"round {record.round_index} after round {state.round_counter}"
        )
    if record.branch not in BRANCHES:
        raise ValueError(f"unknown branch {record.branch!r}")
    if record.profile is not None and not record.passed:
        raise ValueError("profile outcome on a round that failed compile or verify")
    if record.base_id_at_time != state.base_kernel_id:
        raise SequenceViolation(
            f"round {record.round_index} recorded against base "
            f"{record.base_id_at_time!r} but session base is {state.base_kernel_id!r}"
        )
    open_chain = state.open_chain
    if record.branch == "repair":
        if open_chain is None:
            raise SequenceViolation("repair round without an open chain")
        open_chain.attempts.append(
            RepairAttempt(record.plan, record.kernel_id, record.compile, record.verify)
        )
        if record.passed:
            open_chain.open = False
    else:
        if open_chain is not None:
            raise SequenceViolation("optimize round while a repair chain is open")
        history = state.histories.setdefault(
            record.base_id_at_time, OptimizationHistory(record.base_id_at_time)
        )
        if record.passed:
            entry = HistoryEntry(
                method=record.plan.method,
                plan_id=record.plan.plan_id,
                speedup=record.profile.speedup if record.profile else None,
            )
        else:
            entry = HistoryEntry(
                method=record.plan.method,
                plan_id=record.plan.plan_id,
                speedup=None,
                failed_stage="compile" if not record.compile.passed else "verify",
            )
            state.chains.append(
                RepairChain(
                    origin_kernel_id=record.kernel_id,
                    origin_compile=record.compile,
                    origin_verify=record.verify,
                )
            )
        history.entries.append(entry)
    state.rounds.append(record)
    state.round_counter = record.round_index
    return state


def _check_text(label: str, outcome: CheckOutcome) -> str:
    status = "passed" if outcome.passed else "failed"
    detail = f": {outcome.feedback}" if outcome.feedback and not outcome.passed else ""
    return f"{label} {status}{detail}"


def repair_context(state: SessionState) -> str:
    """The open chain rendered for the diagnoser, origin first, newest last."""
    chain = state.open_chain
    if chain is None:
        raise NoOpenChain("no open repair chain in this session")
    lines = [
        f"Repair chain for kernel {chain.origin_kernel_id}"
        f" ({len(chain.attempts)} attempt(s) so far):",
        f"  origin {chain.origin_kernel_id}: "
        + _check_text("compile", chain.origin_compile)
        + "; "
        + _check_text("verify", chain.origin_verify),
    ]
    for i, attempt in enumerate(chain.attempts, start=1):
        lines.append(
            f"  attempt {i} (plan {attempt.plan.plan_id}) -> {attempt.kernel_id}: "
            + _check_text("compile", attempt.compile)
            + "; "
            + _check_text("verify", attempt.verify)
        )
    return "\n".join(lines)


def optimization_context(state: SessionState) -> str:
    """The current base's method history for the planner; empty when fresh."""
    history = state.histories.get(state.base_kernel_id)
    if history is None or not history.entries:
        return ""
    lines = [f"Methods already tried on base {state.base_kernel_id}:"]
    for i, entry in enumerate(history.entries, start=1):
        method = entry.method if entry.method is not None else "(fallback)"
        if entry.speedup is not None:
            outcome = f"speedup {entry.speedup:.4g}"
        elif entry.failed_stage is not None:
            outcome = f"failed {entry.failed_stage}"
        else:
            outcome = "no profile"
        lines.append(f"  {i}. {method} (plan {entry.plan_id}): {outcome}")
    return "\n".join(lines)


def _exceeds(value: float, threshold: float) -> bool:
    # strict ">" at the boundary must follow the arithmetic, not binary float
    # representation (1.3 - 1.0 lands a hair above 0.3); at-threshold within
    # relative 1e-9 counts as not exceeded
    return value > threshold and not math.isclose(value, threshold, rel_tol=1e-9)


def consider_promotion(
    state: SessionState, new_kernel_id: str, speedup_new: float
) -> PromotionDecision:
    """Apply the dual-threshold base rule and the global-max best rule."""
    ratio_ok = state.speedup_base > 0 and _exceeds(
        speedup_new / state.speedup_base, 1.0 + state.rt
    )
    absolute_ok = _exceeds(speedup_new - state.speedup_base, state.at)
    update_base = ratio_ok or absolute_ok
    update_best = speedup_new > state.speedup_best
    if update_best:
        state.best_kernel_id = new_kernel_id
        state.speedup_best = speedup_new
    if update_base:
        state.base_kernel_id = new_kernel_id
        state.speedup_base = speedup_new
        state.histories.setdefault(new_kernel_id, OptimizationHistory(new_kernel_id))
    return PromotionDecision(update_best=update_best, update_base=update_base)
