"""The five reasoning roles, as prompt-templated calls against a backend.

Generator drafts seed candidates, Planner turns a method recommendation
into a stepwise plan, Diagnoser reads failure feedback plus the open repair
chain, and Optimizer/Repairer rewrite program text.  Templates live under
``prompts/`` as plain text assets with named placeholders; agent responses
must put program text in a fenced block tagged ``kernel`` and structured
plans in one tagged ``plan``, everything else is commentary.

Validation is bounded: one retry per call, then degrade.  A seed that stays
malformed is dropped with a report; a plan that twice names a method outside
the recommended set is replaced by a fallback-marked plan; a malformed
rewrite raises so the orchestrator can record a failed round.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from string import Template
from typing import Optional, Tuple

from .backends import ReasoningBackend
from .engine import MethodRecommendation
from .errors import MalformedResponse

PROMPTS_DIR = Path(__file__).parent / "prompts"

REQUIRED_SHELL = "class ModelNew"
FALLBACK_RENDERING = "(fallback)"

_KERNEL_BLOCK = re.compile(r"```kernel\s*\n(.*?)```", re.DOTALL)
_PLAN_BLOCK = re.compile(r"```plan\s*\n(.*?)```", re.DOTALL)


def _template(name: str) -> Template:
    return Template((PROMPTS_DIR / f"{name}.txt").read_text())


@dataclass(frozen=True)
class PlanDocument:
    target_method: Optional[str]  # None marks a fallback plan
    steps: Tuple[str, ...]
    rationale: str = ""

    @property
    def fallback(self) -> bool:
        return self.target_method is None

    def to_dict(self) -> dict:
        return {
            "target_method": self.target_method,
            "steps": list(self.steps),
            "rationale": self.rationale,
        }

    @staticmethod
    def from_dict(doc: dict) -> "PlanDocument":
        return PlanDocument(
            target_method=doc.get("target_method"),
            steps=tuple(doc.get("steps", ())),
            rationale=doc.get("rationale", ""),
        )


@dataclass(frozen=True)
class RepairPlan:
    suspected_root_cause: str
    steps: Tuple[str, ...]
    avoid_list: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "suspected_root_cause": self.suspected_root_cause,
            "steps": list(self.steps),
            "avoid_list": list(self.avoid_list),
        }

    @staticmethod
    def from_dict(doc: dict) -> "RepairPlan":
        return RepairPlan(
            suspected_root_cause=doc.get("suspected_root_cause", ""),
            steps=tuple(doc.get("steps", ())),
            avoid_list=tuple(doc.get("avoid_list", ())),
        )


@dataclass(frozen=True)
class KernelCandidate:
    kernel_id: str
    source: str
    parent_id: Optional[str]  # absent only for seeds
    produced_by: str  # "generator" | "optimizer" | "repairer"
    round_index: int


@dataclass(frozen=True)
class SeedBatch:
    candidates: Tuple[KernelCandidate, ...]
    reports: Tuple[str, ...]


# --- response parsing ------------------------------------------------------


def extract_kernel_source(response: str) -> str:
    """Program text from the fenced kernel block; shell contract enforced."""
    match = _KERNEL_BLOCK.search(response)
    if not match:
        raise MalformedResponse("response carries no fenced `kernel` block")
    source = match.group(1)
    if REQUIRED_SHELL not in source:
        raise MalformedResponse(f"kernel source does not define `{REQUIRED_SHELL}`")
    return source


def _extract_plan_json(response: str) -> dict:
    match = _PLAN_BLOCK.search(response)
    if not match:
        raise MalformedResponse("response carries no fenced `plan` block")
    try:
        doc = json.loads(match.group(1))
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"plan block is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedResponse("plan block must hold a JSON object")
    return doc


# --- generator -------------------------------------------------------------


def render_generator_prompt(reference_program: str, ordinal: int, total: int) -> str:
    return _template("generator").substitute(
        reference=reference_program, ordinal=ordinal, total=total
    )


def generate_seeds(
    reference_program: str, n: int, backend: ReasoningBackend
) -> SeedBatch:
    """Draft n seed candidates (ids s1..sn); malformed drafts are dropped."""
    if n < 1:
        raise ValueError("seed count must be at least 1")
    candidates = []
    reports = []
    for ordinal in range(1, n + 1):
        prompt = render_generator_prompt(reference_program, ordinal, n)
        source = None
        failure: Optional[MalformedResponse] = None
        for _ in range(2):
            response = backend.complete("generator", prompt)
            try:
                source = extract_kernel_source(response)
                break
            except MalformedResponse as exc:
                failure = exc
        if source is None:
            reports.append(f"seed s{ordinal} dropped: {failure}")
            continue
        candidates.append(
            KernelCandidate(
                kernel_id=f"s{ordinal}",
                source=source,
                parent_id=None,
                produced_by="generator",
                round_index=0,
            )
        )
    return SeedBatch(candidates=tuple(candidates), reports=tuple(reports))


# --- planner ---------------------------------------------------------------


def render_planner_prompt(
    recommendation: MethodRecommendation, profile_feedback: str, context: str
) -> str:
    if recommendation.methods:
        method_list = ", ".join(recommendation.methods)
    else:
        method_list = "(none - fallback mode)"
    knowledge_lines = []
    for brief in recommendation.briefs:
        knowledge_lines.append(f"- {brief.method_id}: {brief.rationale}")
        for cue in brief.implementation_cues:
            knowledge_lines.append(f"    cue: {cue}")
    return _template("planner").substitute(
        method_list=method_list,
        method_knowledge="\n".join(knowledge_lines) or "(none)",
        profile_feedback=profile_feedback or "(none)",
        context=context or "(no methods tried on this base yet)",
    )


def plan_optimization(
    recommendation: MethodRecommendation,
    profile_feedback: str,
    context: str,
    backend: ReasoningBackend,
) -> Tuple[PlanDocument, Tuple[str, ...]]:
    """Plan the round; invalid targets get one retry, then the fallback marker."""
    prompt = render_planner_prompt(recommendation, profile_feedback, context)
    reports = []
    allowed = set(recommendation.methods)
    last_plan: Optional[PlanDocument] = None
    for attempt in (1, 2):
        response = backend.complete("planner", prompt)
        try:
            doc = _extract_plan_json(response)
        except MalformedResponse as exc:
            reports.append(f"planner attempt {attempt}: {exc}")
            continue
        plan = PlanDocument(
            target_method=doc.get("target_method"),
            steps=tuple(str(s) for s in doc.get("steps", ()) if str(s).strip()),
            rationale=str(doc.get("rationale", "")),
        )
        if not plan.steps:
            reports.append(f"planner attempt {attempt}: plan has no steps")
            continue
        if plan.target_method is None:
            if recommendation.fallback:
                return plan, tuple(reports)
            reports.append(f"planner attempt {attempt}: null target outside fallback mode")
            last_plan = plan
            continue
        if recommendation.fallback or plan.target_method not in allowed:
            reports.append(
                f"planner attempt {attempt}: target {plan.target_method!r} "
                "outside the recommended set"
            )
            last_plan = plan
            continue
        return plan, tuple(reports)
    # both attempts invalid: degrade to a fallback-marked plan
    steps = last_plan.steps if last_plan else ("Improve the kernel using the profiling evidence.",)
    degraded = PlanDocument(target_method=None, steps=steps, rationale="degraded to fallback")
    return degraded, tuple(reports)


# --- diagnoser -------------------------------------------------------------


def render_diagnoser_prompt(
    compile_feedback: str, verify_feedback: str, context: str
) -> str:
    return _template("diagnoser").substitute(
        compile_feedback=compile_feedback or "(clean)",
        verify_feedback=verify_feedback or "(clean)",
        context=context or "(first failure; no prior attempts)",
    )


_ATTEMPT_LINE = re.compile(r"^\s*attempt \d+ \(plan (\S+)\) -> (\S+):", re.MULTILINE)


def diagnose(
    compile_feedback: str,
    verify_feedback: str,
    context: str,
    backend: ReasoningBackend,
) -> RepairPlan:
    """Root-cause the latest failure; avoid_list mirrors prior failed attempts."""
    prompt = render_diagnoser_prompt(compile_feedback, verify_feedback, context)
    avoid = tuple(
        f"plan {plan_id} on {kernel_id}"
        for plan_id, kernel_id in _ATTEMPT_LINE.findall(context or "")
    )
    response = backend.complete("diagnoser", prompt)
    try:
        doc = _extract_plan_json(response)
        steps = tuple(str(s) for s in doc.get("steps", ()) if str(s).strip())
        root = str(doc.get("suspected_root_cause", "")).strip()
    except MalformedResponse:
        steps = ()
        root = ""
    if not steps:
        steps = ("Re-read the failure feedback and correct the offending kernel code.",)
    if not root:
        root = "undetermined; response gave no usable diagnosis"
    return RepairPlan(suspected_root_cause=root, steps=steps, avoid_list=avoid)


# --- optimizer / repairer --------------------------------------------------


def render_optimizer_prompt(plan: PlanDocument, base_source: str) -> str:
    return _template("optimizer").substitute(
        target_method=plan.target_method or FALLBACK_RENDERING,
        plan_steps="\n".join(f"{i}. {s}" for i, s in enumerate(plan.steps, start=1)),
        base_source=base_source,
    )


def apply_optimization(
    plan: PlanDocument,
    base: KernelCandidate,
    backend: ReasoningBackend,
    kernel_id: str,
    round_index: int,
) -> KernelCandidate:
    """Rewrite the base kernel per the plan; raises MalformedResponse after retry."""
    prompt = render_optimizer_prompt(plan, base.source)
    failure: Optional[MalformedResponse] = None
    for _ in range(2):
        response = backend.complete("optimizer", prompt)
        try:
            source = extract_kernel_source(response)
        except MalformedResponse as exc:
            failure = exc
            continue
        return KernelCandidate(
            kernel_id=kernel_id,
            source=source,
            parent_id=base.kernel_id,
            produced_by="optimizer",
            round_index=round_index,
        )
    raise failure


def render_repairer_prompt(plan: RepairPlan, latest_source: str) -> str:
    avoid = "\n".join(f"- {item}" for item in plan.avoid_list) or "(none)"
    return _template("repairer").substitute(
        root_cause=plan.suspected_root_cause,
        repair_steps="\n".join(f"{i}. {s}" for i, s in enumerate(plan.steps, start=1)),
        avoid_list=avoid,
        latest_source=latest_source,
    )


def apply_repair(
    plan: RepairPlan,
    latest: KernelCandidate,
    backend: ReasoningBackend,
    kernel_id: str,
    round_index: int,
) -> KernelCandidate:
    """Rewrite the chain tail per the repair plan; same retry contract."""
    prompt = render_repairer_prompt(plan, latest.source)
    failure: Optional[MalformedResponse] = None
    for _ in range(2):
        response = backend.complete("repairer", prompt)
        try:
            source = extract_kernel_source(response)
        except MalformedResponse as exc:
            failure = exc
            continue
        return KernelCandidate(
            kernel_id=kernel_id,
            source=source,
            parent_id=latest.kernel_id,
            produced_by="repairer",
            round_index=round_index,
        )
    raise failure
