"""Deterministic decision workflow: evidence in, ranked methods out.

Given profiling evidence and a validated knowledge base, the engine walks a
fixed pipeline:

    1. aggregate inputs into one evidence bundle
    2. normalize raw profiler metrics to standardized fields
    3. compute derived fields in dependency order
    4. discretize indicators into headroom tiers
    5. evaluate predicates and rank bottleneck candidates by priority
    6. match decision cases per candidate, most specific rank first
    7. strip methods forbidden by active veto rules
    8. retrieve method knowledge for the survivors
    9. hand the ranked methods plus briefs to the planner

Every step writes into a :class:`DecisionTrace`.  The trace embeds the full
input evidence, so :func:`reevaluate` can replay any recorded decision
against a knowledge base and reproduce it bit for bit; no session state or
hidden inputs are involved.

The same evidence and KB always produce the same recommendation.  When a
matched case loses all its methods to vetoes, matching moves on to the next
bottleneck candidate rather than a weaker case of the same bottleneck: the
veto said this bottleneck's remedy is unsafe here, not that a less specific
variant of it would be fine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Tuple

from . import expressions
from .expressions import MISSING
from .knowledge import (
    DecisionCase,
    KnowledgeBase,
    MethodKnowledge,
    label_indicator_name,
    resolve_evaluation_order,
)

_parse = lru_cache(maxsize=None)(expressions.parse)


# --- evidence --------------------------------------------------------------


@dataclass(frozen=True)
class EvidenceBundle:
    """Everything the engine is allowed to look at for one decision."""

    raw_metrics: Mapping[str, float]  # aggregated profiler metrics, raw names
    run_features: Mapping[str, object]
    code_features: Mapping[str, object]

    def to_dict(self) -> dict:
        return {
            "raw_metrics": dict(self.raw_metrics),
            "run_features": dict(self.run_features),
            "code_features": dict(self.code_features),
        }

    @staticmethod
    def from_dict(data: Mapping) -> "EvidenceBundle":
        return EvidenceBundle(
            raw_metrics=dict(data.get("raw_metrics", {})),
            run_features=dict(data.get("run_features", {})),
            code_features=dict(data.get("code_features", {})),
        )


# --- trace records ---------------------------------------------------------


@dataclass(frozen=True)
class CaseEvaluation:
    case_id: str
    bottleneck_type: str
    rank: int
    signature_holds: bool
    headroom_holds: bool
    gate_holds: bool

    @property
    def eligible(self) -> bool:
        return self.signature_holds and self.headroom_holds and self.gate_holds


@dataclass(frozen=True)
class VetoApplication:
    rule_name: str
    active: bool
    removed: Tuple[str, ...] = ()


@dataclass(frozen=True)
class WalkStep:
    """One stop in the match walk across bottleneck candidates."""

    bottleneck_type: str
    case_id: Optional[str]
    outcome: str  # "selected" | "vetoed_empty" | "no_eligible_case"


@dataclass(frozen=True)
class DecisionTrace:
    """Self-contained audit record for one engine run."""

    kb_schema_version: str
    evidence: dict  # the input bundle, verbatim
    standardized: Dict[str, float]
    derived: Dict[str, object]  # None marks a value that came out missing
    tiers: Dict[str, str]
    predicates: Dict[str, bool]
    priority_overrides_applied: Tuple[str, ...]
    bottleneck_candidates: Tuple[str, ...]
    case_evaluations: Tuple[CaseEvaluation, ...]
    walk: Tuple[WalkStep, ...]
    vetoes: Tuple[VetoApplication, ...]
    matched_bottleneck: Optional[str]
    matched_case_id: Optional[str]
    methods: Tuple[str, ...]
    fallback: bool
    missing_fields: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "kb_schema_version": self.kb_schema_version,
            "evidence": self.evidence,
            "standardized": dict(self.standardized),
            "derived": dict(self.derived),
            "tiers": dict(self.tiers),
            "predicates": dict(self.predicates),
            "priority_overrides_applied": list(self.priority_overrides_applied),
            "bottleneck_candidates": list(self.bottleneck_candidates),
            "case_evaluations": [
                {
                    "case_id": c.case_id,
                    "bottleneck_type": c.bottleneck_type,
                    "rank": c.rank,
                    "signature_holds": c.signature_holds,
                    "headroom_holds": c.headroom_holds,
                    "gate_holds": c.gate_holds,
                }
                for c in self.case_evaluations
            ],
            "walk": [
                {"bottleneck_type": s.bottleneck_type, "case_id": s.case_id,
                 "outcome": s.outcome}
                for s in self.walk
            ],
            "vetoes": [
                {"rule_name": v.rule_name, "active": v.active, "removed": list(v.removed)}
                for v in self.vetoes
            ],
            "matched_bottleneck": self.matched_bottleneck,
            "matched_case_id": self.matched_case_id,
            "methods": list(self.methods),
            "fallback": self.fallback,
            "missing_fields": list(self.missing_fields),
        }

    @staticmethod
    def from_dict(data: Mapping) -> "DecisionTrace":
        return DecisionTrace(
            kb_schema_version=data["kb_schema_version"],
            evidence=dict(data["evidence"]),
            standardized=dict(data["standardized"]),
            derived=dict(data["derived"]),
            tiers=dict(data["tiers"]),
            predicates=dict(data["predicates"]),
            priority_overrides_applied=tuple(data["priority_overrides_applied"]),
            bottleneck_candidates=tuple(data["bottleneck_candidates"]),
            case_evaluations=tuple(
                CaseEvaluation(
                    case_id=c["case_id"],
                    bottleneck_type=c["bottleneck_type"],
                    rank=c["rank"],
                    signature_holds=c["signature_holds"],
                    headroom_holds=c["headroom_holds"],
                    gate_holds=c["gate_holds"],
                )
                for c in data["case_evaluations"]
            ),
            walk=tuple(
                WalkStep(bottleneck_type=s["bottleneck_type"], case_id=s["case_id"],
                         outcome=s["outcome"])
                for s in data["walk"]
            ),
            vetoes=tuple(
                VetoApplication(rule_name=v["rule_name"], active=v["active"],
                                removed=tuple(v["removed"]))
                for v in data["vetoes"]
            ),
            matched_bottleneck=data["matched_bottleneck"],
            matched_case_id=data["matched_case_id"],
            methods=tuple(data["methods"]),
            fallback=data["fallback"],
            missing_fields=tuple(data["missing_fields"]),
        )


@dataclass(frozen=True)
class MethodRecommendation:
    methods: Tuple[str, ...]  # ranked, best first
    briefs: Tuple[MethodKnowledge, ...]
    fallback: bool
    trace: DecisionTrace


# --- pipeline steps --------------------------------------------------------


def normalize_metrics(kb: KnowledgeBase, raw_metrics: Mapping[str, float]) -> Dict[str, float]:
    """Map raw profiler metric names to standardized fields, applying scales.

    Raw metrics the KB does not map are dropped; mapped fields whose raw
    metric is absent simply stay missing.
    """
    out: Dict[str, float] = {}
    for entry in kb.field_mapping:
        value = raw_metrics.get(entry.raw_metric_name)
        if value is None:
            continue
        out[entry.standard_field] = float(value) * entry.scale
    return out


def build_environment(kb: KnowledgeBase, bundle: EvidenceBundle) -> Dict[str, object]:
    """Flat evidence environment for expression evaluation.

    Label-valued code features are expanded into one boolean indicator per
    declared label; the raw label value stays alongside for trace readers.
    Absent evidence is represented by absence, never by a placeholder value.
    """
    env: Dict[str, object] = {}
    env.update(normalize_metrics(kb, bundle.raw_metrics))
    for rf in kb.run_features:
        value = bundle.run_features.get(rf.name)
        if value is not None:
            env[rf.name] = value
    for cf in kb.code_features:
        value = bundle.code_features.get(cf.name)
        if value is None:
            continue
        env[cf.name] = value
        if cf.domain.kind == "label":
            for label in cf.domain.labels:
                env[label_indicator_name(cf.name, label)] = value == label
    return env


def compute_derived_fields(kb: KnowledgeBase, env: Dict[str, object]) -> Dict[str, object]:
    """Evaluate derived fields in dependency order, mutating env in place.

    Returns the trace view: every derived name, with None where the value
    came out missing (such names are left out of env so downstream
    expressions see them as absent).
    """
    derived: Dict[str, object] = {}
    by_name = {df.name: df for df in kb.derived_fields}
    for name in resolve_evaluation_order(kb):
        value = expressions.evaluate(_parse(by_name[name].expression), env)
        if value is MISSING:
            derived[name] = None
            continue
        if isinstance(value, float):
            value = float(value)
        derived[name] = value
        env[name] = value
    return derived


def assign_headroom_tiers(kb: KnowledgeBase, env: Mapping[str, object]) -> Dict[str, str]:
    """Tier label per indicator; indicators without a numeric value get none."""
    tiers: Dict[str, str] = {}
    for tier in kb.headroom_tiers:
        value = env.get(tier.indicator)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            continue
        tiers[tier.indicator] = tier.assign(float(value))
    return tiers


def evaluate_predicates(kb: KnowledgeBase, env: Mapping[str, object]) -> Dict[str, bool]:
    return {
        p.name: expressions.evaluate_predicate(_parse(p.expression), env)
        for p in kb.predicates
    }


def identify_bottlenecks(
    kb: KnowledgeBase, predicate_values: Mapping[str, bool]
) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    """Ordered bottleneck candidates plus the override conditions that fired.

    A bottleneck type is a candidate when at least one of its decision cases
    has a fully satisfied signature.  Candidates start in priority order;
    each firing override then moves its target to the front, in declaration
    order, so the last firing override wins the front spot.
    """
    candidates = [
        label
        for label in kb.priority.ordering
        if any(
            _signature_holds(case, predicate_values)
            for case in kb.decision_cases
            if case.bottleneck_type == label
        )
    ]
    fired = []
    for override in kb.priority.overrides:
        if predicate_values.get(override.condition, False) and override.promote in candidates:
            candidates.remove(override.promote)
            candidates.insert(0, override.promote)
            fired.append(override.condition)
    return tuple(candidates), tuple(fired)


def _signature_holds(case: DecisionCase, predicate_values: Mapping[str, bool]) -> bool:
    return all(predicate_values.get(p, False) for p in case.ncu_signature)


def _headroom_holds(case: DecisionCase, tiers: Mapping[str, str]) -> bool:
    return all(
        tiers.get(indicator) in acceptable
        for indicator, acceptable in case.headroom_condition
    )


def _gate_holds(case: DecisionCase, predicate_values: Mapping[str, bool]) -> bool:
    return all(predicate_values.get(p, False) for p in case.gate_when)


def evaluate_case(
    case: DecisionCase,
    predicate_values: Mapping[str, bool],
    tiers: Mapping[str, str],
) -> CaseEvaluation:
    return CaseEvaluation(
        case_id=case.case_id,
        bottleneck_type=case.bottleneck_type,
        rank=case.rank,
        signature_holds=_signature_holds(case, predicate_values),
        headroom_holds=_headroom_holds(case, tiers),
        gate_holds=_gate_holds(case, predicate_values),
    )


def active_vetoes(
    kb: KnowledgeBase,
    predicate_values: Mapping[str, bool],
    env: Mapping[str, object],
) -> List[str]:
    """Names of veto rules whose condition currently holds.

    A condition is a predicate reference when one of that name exists;
    otherwise it is evaluated as an inline expression against the evidence.
    """
    names = []
    predicate_names = {p.name for p in kb.predicates}
    for rule in kb.vetoes:
        if rule.condition in predicate_names:
            held = predicate_values.get(rule.condition, False)
        else:
            try:
                held = expressions.evaluate_predicate(_parse(rule.condition), env)
            except Exception:
                held = False  # malformed conditions are validation's problem
        if held:
            names.append(rule.name)
    return names


def apply_veto_rules(
    kb: KnowledgeBase,
    methods: Tuple[str, ...],
    active: List[str],
) -> Tuple[Tuple[str, ...], List[VetoApplication]]:
    """Filter a method list through the active vetoes, preserving order."""
    applications = []
    surviving = list(methods)
    active_set = set(active)
    for rule in kb.vetoes:
        if rule.name not in active_set:
            applications.append(VetoApplication(rule.name, active=False))
            continue
        removed = tuple(m for m in surviving if m in rule.forbidden_methods)
        surviving = [m for m in surviving if m not in rule.forbidden_methods]
        applications.append(VetoApplication(rule.name, active=True, removed=removed))
    return tuple(surviving), applications


def _referenced_fields(kb: KnowledgeBase) -> Tuple[str, ...]:
    predicate_names = {p.name for p in kb.predicates}
    refs: set = set()
    for df in kb.derived_fields:
        refs |= _safe_refs(df.expression)
    for pred in kb.predicates:
        refs |= _safe_refs(pred.expression)
    for rule in kb.vetoes:
        if rule.condition not in predicate_names:
            refs |= _safe_refs(rule.condition)
    refs |= {t.indicator for t in kb.headroom_tiers}
    return tuple(sorted(refs))


def _safe_refs(text: str) -> set:
    try:
        return expressions.referenced_identifiers(_parse(text))
    except Exception:
        return set()


# --- the workflow ----------------------------------------------------------


def recommend(kb: KnowledgeBase, bundle: EvidenceBundle) -> MethodRecommendation:
    """Run the full nine-step workflow and return ranked methods with trace."""
    env = build_environment(kb, bundle)
    standardized = normalize_metrics(kb, bundle.raw_metrics)
    derived = compute_derived_fields(kb, env)
    tiers = assign_headroom_tiers(kb, env)
    predicate_values = evaluate_predicates(kb, env)
    candidates, fired = identify_bottlenecks(kb, predicate_values)

    case_evaluations = tuple(
        evaluate_case(case, predicate_values, tiers) for case in kb.decision_cases
    )
    eligibility = {c.case_id: c.eligible for c in case_evaluations}
    active = active_vetoes(kb, predicate_values, env)

    walk: List[WalkStep] = []
    matched_case: Optional[DecisionCase] = None
    methods: Tuple[str, ...] = ()
    veto_apps: List[VetoApplication] = [
        VetoApplication(rule.name, active=rule.name in active) for rule in kb.vetoes
    ]
    for label in candidates:
        chosen = next(
            (case for case in kb.cases_for(label) if eligibility[case.case_id]), None
        )
        if chosen is None:
            walk.append(WalkStep(label, None, "no_eligible_case"))
            continue
        surviving, veto_apps = apply_veto_rules(kb, chosen.allowed_methods, active)
        if not surviving:
            walk.append(WalkStep(label, chosen.case_id, "vetoed_empty"))
            continue
        walk.append(WalkStep(label, chosen.case_id, "selected"))
        matched_case = chosen
        methods = surviving
        break

    missing = tuple(
        name for name in _referenced_fields(kb) if name not in env
    )
    trace = DecisionTrace(
        kb_schema_version=kb.schema_version,
        evidence=bundle.to_dict(),
        standardized=standardized,
        derived=derived,
        tiers=tiers,
        predicates=predicate_values,
        priority_overrides_applied=fired,
        bottleneck_candidates=candidates,
        case_evaluations=case_evaluations,
        walk=tuple(walk),
        vetoes=tuple(veto_apps),
        matched_bottleneck=matched_case.bottleneck_type if matched_case else None,
        matched_case_id=matched_case.case_id if matched_case else None,
        methods=methods,
        fallback=matched_case is None,
        missing_fields=missing,
    )
    method_map = kb.method_map()
    briefs = tuple(method_map[m] for m in methods if m in method_map)
    return MethodRecommendation(
        methods=methods, briefs=briefs, fallback=matched_case is None, trace=trace
    )


def reevaluate(kb: KnowledgeBase, trace: DecisionTrace) -> MethodRecommendation:
    """Re-run a recorded decision from the evidence embedded in its trace."""
    return recommend(kb, EvidenceBundle.from_dict(trace.evidence))
