"""Long-term knowledge base: loading, validation, and derived-field ordering.

The knowledge base is a directory (or single-file bundle) of ten structured
JSON documents, one per section:

    field_mapping            raw profiler metric names -> standardized fields
    run_features_schema      runtime features collected from the system profiler
    code_features            static code features (rule or assisted extraction)
    derived_fields           deterministic composite indicators
    headroom_tiers           discretization of indicators into ordered tiers
    bottleneck_priority_rules  conflict resolution across bottleneck types
    ncu_predicates           reusable named boolean predicates
    global_forbidden_rules   veto rules that strip unsafe methods everywhere
    decision_table           evidence patterns -> ordered candidate methods
    llm_assist               per-method rationale and implementation cues

Documents are human-editable and diffable; see ``docs/kb-schema.md`` for the
full schema.  A loaded :class:`KnowledgeBase` is immutable and, once
validated, safe to share read-only across concurrent sessions.

Validation is data-producing, not fault-raising: :func:`validate_knowledge_base`
returns a report of violations (dangling references, cycles, duplicates,
uncovered bottleneck types, orphaned method knowledge, ...) with locations,
so an operator can fix the KB document by document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from . import expressions
from .errors import CyclicDependency, ExpressionSyntaxError, MalformedDocument, MissingSection

SECTION_NAMES = (
    "field_mapping",
    "run_features_schema",
    "code_features",
    "derived_fields",
    "headroom_tiers",
    "bottleneck_priority_rules",
    "ncu_predicates",
    "global_forbidden_rules",
    "decision_table",
    "llm_assist",
)

RUN_FEATURE_DOMAINS = ("count", "duration_ms", "boolean", "label")
BOUNDARY_RULES = ("lower-inclusive", "upper-inclusive")

DEFAULT_KB_RESOURCE = Path(__file__).parent / "kb_default"


# --- domain types ----------------------------------------------------------


@dataclass(frozen=True)
class FieldMappingEntry:
    raw_metric_name: str
    standard_field: str
    unit: str
    scale: float


@dataclass(frozen=True)
class RunFeatureDef:
    name: str
    value_domain: str  # one of RUN_FEATURE_DOMAINS
    description: str


@dataclass(frozen=True)
class ValueDomain:
    kind: str  # "boolean" | "count" | "label"
    labels: Tuple[str, ...] = ()

    def contains(self, value) -> bool:
        if self.kind == "boolean":
            return isinstance(value, bool)
        if self.kind == "count":
            return isinstance(value, int) and not isinstance(value, bool) and value >= 0
        return isinstance(value, str) and value in self.labels


@dataclass(frozen=True)
class CodeFeatureDef:
    name: str
    domain: ValueDomain
    mode: str  # "rule" | "assisted"
    default: object
    pattern: Optional[dict] = None  # rule mode: token/regex-style match spec
    prompt_spec: Optional[dict] = None  # assisted mode: definition + allowed values


@dataclass(frozen=True)
class DerivedFieldDef:
    name: str
    expression: str


@dataclass(frozen=True)
class HeadroomTierDef:
    indicator: str
    thresholds: Tuple[float, ...]
    tier_labels: Tuple[str, ...]
    boundary_rule: str

    def assign(self, value: float) -> str:
        """Tier label for a value, honouring the boundary rule at cut points."""
        if self.boundary_rule == "lower-inclusive":
            index = sum(1 for t in self.thresholds if value >= t)
        else:
            index = sum(1 for t in self.thresholds if value > t)
        return self.tier_labels[index]


@dataclass(frozen=True)
class PredicateDef:
    name: str
    expression: str


@dataclass(frozen=True)
class PriorityOverride:
    condition: str  # predicate reference
    promote: str  # bottleneck type moved to the front while condition holds


@dataclass(frozen=True)
class PriorityRule:
    ordering: Tuple[str, ...]
    overrides: Tuple[PriorityOverride, ...] = ()


@dataclass(frozen=True)
class VetoRule:
    name: str
    condition: str  # predicate reference, or an inline expression
    forbidden_methods: Tuple[str, ...]
    reason: str


@dataclass(frozen=True)
class DecisionCase:
    case_id: str
    bottleneck_type: str
    ncu_signature: Tuple[str, ...]  # conjunction of predicate references
    headroom_condition: Tuple[Tuple[str, Tuple[str, ...]], ...]  # (indicator, acceptable tiers)
    allowed_methods: Tuple[str, ...]
    rank: int
    gate_when: Tuple[str, ...] = ()  # additional gating predicates


@dataclass(frozen=True)
class MethodKnowledge:
    method_id: str
    rationale: str
    implementation_cues: Tuple[str, ...]
    expected_benefit: str
    preconditions_note: str


@dataclass(frozen=True)
class KnowledgeBase:
    field_mapping: Tuple[FieldMappingEntry, ...]
    run_features: Tuple[RunFeatureDef, ...]
    code_features: Tuple[CodeFeatureDef, ...]
    derived_fields: Tuple[DerivedFieldDef, ...]
    headroom_tiers: Tuple[HeadroomTierDef, ...]
    priority: PriorityRule
    predicates: Tuple[PredicateDef, ...]
    vetoes: Tuple[VetoRule, ...]
    decision_cases: Tuple[DecisionCase, ...]
    methods: Tuple[MethodKnowledge, ...]
    schema_version: str

    @property
    def bottleneck_types(self) -> Tuple[str, ...]:
        """Declared bottleneck label set (the priority ordering declares it)."""
        return self.priority.ordering

    def method_map(self) -> Dict[str, MethodKnowledge]:
        return {m.method_id: m for m in self.methods}

    def predicate_map(self) -> Dict[str, PredicateDef]:
        return {p.name: p for p in self.predicates}

    def mapping_by_raw(self) -> Dict[str, FieldMappingEntry]:
        return {e.raw_metric_name: e for e in self.field_mapping}

    def cases_for(self, bottleneck_type: str) -> List[DecisionCase]:
        cases = [c for c in self.decision_cases if c.bottleneck_type == bottleneck_type]
        return sorted(cases, key=lambda c: (c.rank, c.case_id))

    def code_feature_map(self) -> Dict[str, CodeFeatureDef]:
        return {f.name: f for f in self.code_features}


def label_indicator_name(feature: str, label: str) -> str:
    """Boolean evidence identifier published for a label-valued feature."""
    return f"{feature}_is_{label}"


def declared_identifiers(kb: KnowledgeBase) -> Dict[str, str]:
    """Every evidence identifier expressions may reference, with its origin.

    Label-valued code features additionally publish one boolean indicator per
    label (``<feature>_is_<label>``) so the closed grammar, which has no
    string literals, can still branch on labels.
    """
    out: Dict[str, str] = {}
    for entry in kb.field_mapping:
        out[entry.standard_field] = "standard"
    for rf in kb.run_features:
        out[rf.name] = "run"
    for cf in kb.code_features:
        out[cf.name] = "code"
        if cf.domain.kind == "label":
            for label in cf.domain.labels:
                out[label_indicator_name(cf.name, label)] = "indicator"
    for df in kb.derived_fields:
        out[df.name] = "derived"
    return out


# --- loading ---------------------------------------------------------------


def _require(obj: Mapping, key: str, path: str):
    if key not in obj:
        raise MalformedDocument(path, f"missing key {key!r}")
    return obj[key]


def _check_keys(obj: Mapping, allowed: Sequence[str], path: str) -> None:
    extra = set(obj) - set(allowed)
    if extra:
        raise MalformedDocument(path, f"unknown keys: {', '.join(sorted(extra))}")


def _str(value, path: str, key: str) -> str:
    if not isinstance(value, str):
        raise MalformedDocument(path, f"{key} must be a string")
    return value


def _number(value, path: str, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedDocument(path, f"{key} must be a number")
    return float(value)


def _str_list(value, path: str, key: str) -> Tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise MalformedDocument(path, f"{key} must be a list of strings")
    return tuple(value)


def _parse_field_mapping(doc: Mapping, path: str) -> Tuple[FieldMappingEntry, ...]:
    entries = _require(doc, "entries", path)
    if not isinstance(entries, list):
        raise MalformedDocument(path, "entries must be a list")
    out = []
    for i, entry in enumerate(entries):
        loc = f"{path}#entries[{i}]"
        _check_keys(entry, ("raw", "field", "unit", "scale"), loc)
        out.append(
            FieldMappingEntry(
                raw_metric_name=_str(_require(entry, "raw", loc), loc, "raw"),
                standard_field=_str(_require(entry, "field", loc), loc, "field"),
                unit=_str(entry.get("unit", ""), loc, "unit"),
                scale=_number(entry.get("scale", 1.0), loc, "scale"),
            )
        )
    return tuple(out)


def _parse_run_features(doc: Mapping, path: str) -> Tuple[RunFeatureDef, ...]:
    features = _require(doc, "features", path)
    out = []
    for i, feat in enumerate(features):
        loc = f"{path}#features[{i}]"
        _check_keys(feat, ("name", "value_domain", "description"), loc)
        domain = _str(_require(feat, "value_domain", loc), loc, "value_domain")
        if domain not in RUN_FEATURE_DOMAINS:
            raise MalformedDocument(loc, f"value_domain must be one of {RUN_FEATURE_DOMAINS}")
        out.append(
            RunFeatureDef(
                name=_str(_require(feat, "name", loc), loc, "name"),
                value_domain=domain,
                description=_str(feat.get("description", ""), loc, "description"),
            )
        )
    return tuple(out)


def _parse_value_domain(raw, path: str) -> ValueDomain:
    if not isinstance(raw, Mapping):
        raise MalformedDocument(path, "value_domain must be an object")
    _check_keys(raw, ("kind", "labels"), path)
    kind = _str(_require(raw, "kind", path), path, "kind")
    if kind not in ("boolean", "count", "label"):
        raise MalformedDocument(path, f"unknown value_domain kind {kind!r}")
    labels = _str_list(raw.get("labels", []), path, "labels")
    if kind == "label" and not labels:
        raise MalformedDocument(path, "label domain requires labels")
    if kind != "label" and labels:
        raise MalformedDocument(path, f"{kind} domain takes no labels")
    return ValueDomain(kind=kind, labels=labels)


def _parse_code_features(doc: Mapping, path: str) -> Tuple[CodeFeatureDef, ...]:
    features = _require(doc, "features", path)
    out = []
    for i, feat in enumerate(features):
        loc = f"{path}#features[{i}]"
        _check_keys(feat, ("name", "value_domain", "mode", "pattern", "prompt_spec", "default"), loc)
        name = _str(_require(feat, "name", loc), loc, "name")
        domain = _parse_value_domain(_require(feat, "value_domain", loc), loc)
        mode = _str(_require(feat, "mode", loc), loc, "mode")
        if mode not in ("rule", "assisted"):
            raise MalformedDocument(loc, f"mode must be rule or assisted, got {mode!r}")
        default = _require(feat, "default", loc)
        pattern = feat.get("pattern")
        prompt_spec = feat.get("prompt_spec")
        if pattern is not None and not isinstance(pattern, Mapping):
            raise MalformedDocument(loc, "pattern must be an object")
        if prompt_spec is not None and not isinstance(prompt_spec, Mapping):
            raise MalformedDocument(loc, "prompt_spec must be an object")
        out.append(
            CodeFeatureDef(
                name=name,
                domain=domain,
                mode=mode,
                default=default,
                pattern=dict(pattern) if pattern is not None else None,
                prompt_spec=dict(prompt_spec) if prompt_spec is not None else None,
            )
        )
    return tuple(out)


def _parse_derived_fields(doc: Mapping, path: str) -> Tuple[DerivedFieldDef, ...]:
    fields_ = _require(doc, "fields", path)
    out = []
    for i, item in enumerate(fields_):
        loc = f"{path}#fields[{i}]"
        _check_keys(item, ("name", "expression"), loc)
        out.append(
            DerivedFieldDef(
                name=_str(_require(item, "name", loc), loc, "name"),
                expression=_str(_require(item, "expression", loc), loc, "expression"),
            )
        )
    return tuple(out)


def _parse_headroom_tiers(doc: Mapping, path: str) -> Tuple[HeadroomTierDef, ...]:
    tiers = _require(doc, "tiers", path)
    out = []
    for i, tier in enumerate(tiers):
        loc = f"{path}#tiers[{i}]"
        _check_keys(tier, ("indicator", "thresholds", "labels", "boundary_rule"), loc)
        thresholds = _require(tier, "thresholds", loc)
        if not isinstance(thresholds, list) or not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in thresholds
        ):
            raise MalformedDocument(loc, "thresholds must be a list of numbers")
        boundary = _str(tier.get("boundary_rule", "lower-inclusive"), loc, "boundary_rule")
        if boundary not in BOUNDARY_RULES:
            raise MalformedDocument(loc, f"boundary_rule must be one of {BOUNDARY_RULES}")
        out.append(
            HeadroomTierDef(
                indicator=_str(_require(tier, "indicator", loc), loc, "indicator"),
                thresholds=tuple(float(t) for t in thresholds),
                tier_labels=_str_list(_require(tier, "labels", loc), loc, "labels"),
                boundary_rule=boundary,
            )
        )
    return tuple(out)


def _parse_priority(doc: Mapping, path: str) -> PriorityRule:
    ordering = _str_list(_require(doc, "ordering", path), path, "ordering")
    overrides = []
    for i, item in enumerate(doc.get("overrides", [])):
        loc = f"{path}#overrides[{i}]"
        _check_keys(item, ("condition", "promote"), loc)
        overrides.append(
            PriorityOverride(
                condition=_str(_require(item, "condition", loc), loc, "condition"),
                promote=_str(_require(item, "promote", loc), loc, "promote"),
            )
        )
    return PriorityRule(ordering=ordering, overrides=tuple(overrides))


def _parse_predicates(doc: Mapping, path: str) -> Tuple[PredicateDef, ...]:
    predicates = _require(doc, "predicates", path)
    out = []
    for i, item in enumerate(predicates):
        loc = f"{path}#predicates[{i}]"
        _check_keys(item, ("name", "expression"), loc)
        out.append(
            PredicateDef(
                name=_str(_require(item, "name", loc), loc, "name"),
                expression=_str(_require(item, "expression", loc), loc, "expression"),
            )
        )
    return tuple(out)


def _parse_vetoes(doc: Mapping, path: str) -> Tuple[VetoRule, ...]:
    rules = _require(doc, "rules", path)
    out = []
    for i, item in enumerate(rules):
        loc = f"{path}#rules[{i}]"
        _check_keys(item, ("name", "condition", "forbidden_methods", "reason"), loc)
        out.append(
            VetoRule(
                name=_str(_require(item, "name", loc), loc, "name"),
                condition=_str(_require(item, "condition", loc), loc, "condition"),
                forbidden_methods=_str_list(
                    _require(item, "forbidden_methods", loc), loc, "forbidden_methods"
                ),
                reason=_str(item.get("reason", ""), loc, "reason"),
            )
        )
    return tuple(out)


def _parse_decision_table(doc: Mapping, path: str) -> Tuple[DecisionCase, ...]:
    cases = _require(doc, "cases", path)
    out = []
    for i, item in enumerate(cases):
        loc = f"{path}#cases[{i}]"
        _check_keys(
            item,
            ("case_id", "bottleneck_type", "ncu_signature", "headroom_condition",
             "gate_when", "allowed_methods", "rank"),
            loc,
        )
        headroom_raw = item.get("headroom_condition", {})
        if not isinstance(headroom_raw, Mapping):
            raise MalformedDocument(loc, "headroom_condition must be an object")
        headroom = tuple(
            (indicator, _str_list(tiers, loc, f"headroom_condition[{indicator}]"))
            for indicator, tiers in headroom_raw.items()
        )
        rank = _require(item, "rank", loc)
        if isinstance(rank, bool) or not isinstance(rank, int):
            raise MalformedDocument(loc, "rank must be an integer")
        out.append(
            DecisionCase(
                case_id=_str(_require(item, "case_id", loc), loc, "case_id"),
                bottleneck_type=_str(
                    _require(item, "bottleneck_type", loc), loc, "bottleneck_type"
                ),
                ncu_signature=_str_list(
                    item.get("ncu_signature", []), loc, "ncu_signature"
                ),
                headroom_condition=headroom,
                gate_when=_str_list(item.get("gate_when", []), loc, "gate_when"),
                allowed_methods=_str_list(
                    _require(item, "allowed_methods", loc), loc, "allowed_methods"
                ),
                rank=rank,
            )
        )
    return tuple(out)


def _parse_methods(doc: Mapping, path: str) -> Tuple[MethodKnowledge, ...]:
    methods = _require(doc, "methods", path)
    out = []
    for i, item in enumerate(methods):
        loc = f"{path}#methods[{i}]"
        _check_keys(
            item,
            ("method_id", "rationale", "implementation_cues", "expected_benefit",
             "preconditions_note"),
            loc,
        )
        out.append(
            MethodKnowledge(
                method_id=_str(_require(item, "method_id", loc), loc, "method_id"),
                rationale=_str(item.get("rationale", ""), loc, "rationale"),
                implementation_cues=_str_list(
                    item.get("implementation_cues", []), loc, "implementation_cues"
                ),
                expected_benefit=_str(item.get("expected_benefit", ""), loc, "expected_benefit"),
                preconditions_note=_str(
                    item.get("preconditions_note", ""), loc, "preconditions_note"
                ),
            )
        )
    return tuple(out)


_SECTION_PARSERS = {
    "field_mapping": _parse_field_mapping,
    "run_features_schema": _parse_run_features,
    "code_features": _parse_code_features,
    "derived_fields": _parse_derived_fields,
    "headroom_tiers": _parse_headroom_tiers,
    "bottleneck_priority_rules": _parse_priority,
    "ncu_predicates": _parse_predicates,
    "global_forbidden_rules": _parse_vetoes,
    "decision_table": _parse_decision_table,
    "llm_assist": _parse_methods,
}


def kb_from_bundle(bundle: Mapping, origin: str = "<bundle>") -> KnowledgeBase:
    """Build a KnowledgeBase from a ten-section mapping.

    Shape errors raise :class:`MalformedDocument`; semantic problems (dangling
    references, cycles, duplicates) are left for :func:`validate_knowledge_base`.
    """
    unknown = set(bundle) - set(SECTION_NAMES)
    if unknown:
        raise MalformedDocument(origin, f"unrecognized sections: {', '.join(sorted(unknown))}")
    for name in SECTION_NAMES:
        if name not in bundle:
            raise MissingSection(name)

    versions = set()
    parsed = {}
    for name in SECTION_NAMES:
        doc = bundle[name]
        path = f"{origin}/{name}"
        if not isinstance(doc, Mapping):
            raise MalformedDocument(path, "section must be an object")
        version = doc.get("schema_version")
        if not isinstance(version, str):
            raise MalformedDocument(path, "schema_version missing or not a string")
        versions.add(version)
        payload = {k: v for k, v in doc.items() if k != "schema_version"}
        parsed[name] = _SECTION_PARSERS[name](payload, path)
    if len(versions) != 1:
        raise MalformedDocument(origin, f"inconsistent schema_version across sections: {sorted(versions)}")

    return KnowledgeBase(
        field_mapping=parsed["field_mapping"],
        run_features=parsed["run_features_schema"],
        code_features=parsed["code_features"],
        derived_fields=parsed["derived_fields"],
        headroom_tiers=parsed["headroom_tiers"],
        priority=parsed["bottleneck_priority_rules"],
        predicates=parsed["ncu_predicates"],
        vetoes=parsed["global_forbidden_rules"],
        decision_cases=parsed["decision_table"],
        methods=parsed["llm_assist"],
        schema_version=versions.pop(),
    )


def load_knowledge_base(source: Union[str, Path]) -> KnowledgeBase:
    """Load a knowledge base from a section directory or a single-file bundle.

    Directories must contain exactly one ``<section>.json`` per section and no
    unrecognized ``*.json`` files; a bundle file carries the ten sections as
    top-level keys.
    """
    source = Path(source)
    if source.is_dir():
        bundle = {}
        for doc_path in sorted(source.glob("*.json")):
            name = doc_path.stem
            if name not in SECTION_NAMES:
                raise MalformedDocument(str(doc_path), "unrecognized section")
            try:
                bundle[name] = json.loads(doc_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise MalformedDocument(str(doc_path), f"invalid JSON: {exc}") from exc
        for name in SECTION_NAMES:
            if name not in bundle:
                raise MissingSection(name)
        return kb_from_bundle(bundle, origin=str(source))
    if source.is_file():
        try:
            bundle = json.loads(source.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedDocument(str(source), f"invalid JSON: {exc}") from exc
        if not isinstance(bundle, Mapping):
            raise MalformedDocument(str(source), "bundle must be a JSON object")
        return kb_from_bundle(bundle, origin=str(source))
    raise MalformedDocument(str(source), "no such file or directory")


def load_default_kb() -> KnowledgeBase:
    """The knowledge base shipped with the package."""
    return load_knowledge_base(DEFAULT_KB_RESOURCE)


# --- serialization ---------------------------------------------------------


def kb_to_bundle(kb: KnowledgeBase) -> Dict[str, dict]:
    """Serialize back to the ten-section bundle form (round-trip stable)."""
    v = kb.schema_version

    def tag(payload: dict) -> dict:
        return {"schema_version": v, **payload}

    return {
        "field_mapping": tag({
            "entries": [
                {"raw": e.raw_metric_name, "field": e.standard_field, "unit": e.unit,
                 "scale": e.scale}
                for e in kb.field_mapping
            ]
        }),
        "run_features_schema": tag({
            "features": [
                {"name": f.name, "value_domain": f.value_domain, "description": f.description}
                for f in kb.run_features
            ]
        }),
        "code_features": tag({
            "features": [
                {
                    "name": f.name,
                    "value_domain": (
                        {"kind": f.domain.kind, "labels": list(f.domain.labels)}
                        if f.domain.kind == "label"
                        else {"kind": f.domain.kind}
                    ),
                    "mode": f.mode,
                    "default": f.default,
                    **({"pattern": f.pattern} if f.pattern is not None else {}),
                    **({"prompt_spec": f.prompt_spec} if f.prompt_spec is not None else {}),
                }
                for f in kb.code_features
            ]
        }),
        "derived_fields": tag({
            "fields": [{"name": f.name, "expression": f.expression} for f in kb.derived_fields]
        }),
        "headroom_tiers": tag({
            "tiers": [
                {"indicator": t.indicator, "thresholds": list(t.thresholds),
                 "labels": list(t.tier_labels), "boundary_rule": t.boundary_rule}
                for t in kb.headroom_tiers
            ]
        }),
        "bottleneck_priority_rules": tag({
            "ordering": list(kb.priority.ordering),
            "overrides": [
                {"condition": o.condition, "promote": o.promote} for o in kb.priority.overrides
            ],
        }),
        "ncu_predicates": tag({
            "predicates": [{"name": p.name, "expression": p.expression} for p in kb.predicates]
        }),
        "global_forbidden_rules": tag({
            "rules": [
                {"name": r.name, "condition": r.condition,
                 "forbidden_methods": list(r.forbidden_methods), "reason": r.reason}
                for r in kb.vetoes
            ]
        }),
        "decision_table": tag({
            "cases": [
                {
                    "case_id": c.case_id,
                    "bottleneck_type": c.bottleneck_type,
                    "ncu_signature": list(c.ncu_signature),
                    "headroom_condition": {k: list(v) for k, v in c.headroom_condition},
                    "gate_when": list(c.gate_when),
                    "allowed_methods": list(c.allowed_methods),
                    "rank": c.rank,
                }
                for c in kb.decision_cases
            ]
        }),
        "llm_assist": tag({
            "methods": [
                {
                    "method_id": m.method_id,
                    "rationale": m.rationale,
                    "implementation_cues": list(m.implementation_cues),
                    "expected_benefit": m.expected_benefit,
                    "preconditions_note": m.preconditions_note,
                }
                for m in kb.methods
            ]
        }),
    }


def save_knowledge_base(kb: KnowledgeBase, directory: Union[str, Path]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, doc in kb_to_bundle(kb).items():
        (directory / f"{name}.json").write_text(
            json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8"
        )


# --- validation ------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    location: str
    message: str
    severity: str = "error"  # "error" | "warning"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    def add(self, code: str, location: str, message: str, severity: str = "error") -> None:
        self.violations.append(Violation(code, location, message, severity))

    def errors(self) -> List[Violation]:
        return [v for v in self.violations if v.severity == "error"]

    def warnings(self) -> List[Violation]:
        return [v for v in self.violations if v.severity == "warning"]

    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> List[str]:
        return [v.code for v in self.violations]


def _check_expression(report, text, location, declared, extra_refs_ok=()):
    """Parse an expression and verify every identifier it reads is declared."""
    try:
        node = expressions.parse(text)
    except ExpressionSyntaxError as exc:
        report.add("MalformedExpression", location, str(exc))
        return None
    for ident in sorted(expressions.referenced_identifiers(node)):
        if ident not in declared and ident not in extra_refs_ok:
            report.add("DanglingReference", location, f"unknown identifier {ident!r}")
    return node


def validate_knowledge_base(kb: KnowledgeBase) -> ValidationReport:
    """Check every cross-reference and structural invariant; report violations.

    The report is empty iff the KB is internally consistent.  Dangling
    references are errors; method knowledge that nothing references is a
    warning (unused knowledge is harmless, broken references are not).
    """
    report = ValidationReport()
    declared = declared_identifiers(kb)

    # field mapping: unique names both ways, sane scales
    seen_raw: Dict[str, int] = {}
    seen_std: Dict[str, int] = {}
    for i, entry in enumerate(kb.field_mapping):
        loc = f"field_mapping#entries[{i}]"
        if entry.raw_metric_name in seen_raw:
            report.add("DuplicateIdentifier", loc, f"raw metric {entry.raw_metric_name!r} mapped twice")
        if entry.standard_field in seen_std:
            report.add("DuplicateIdentifier", loc, f"standard field {entry.standard_field!r} defined twice")
        seen_raw.setdefault(entry.raw_metric_name, i)
        seen_std.setdefault(entry.standard_field, i)
        if entry.scale == 0 or entry.scale != entry.scale or entry.scale in (float("inf"), float("-inf")):
            report.add("InvalidScale", loc, f"scale must be finite and nonzero, got {entry.scale}")

    # identifier namespaces must not collide across sections
    _check_namespace_collisions(kb, report)

    # run features
    seen = set()
    for i, rf in enumerate(kb.run_features):
        loc = f"run_features_schema#features[{i}]"
        if rf.name in seen:
            report.add("DuplicateIdentifier", loc, f"run feature {rf.name!r} declared twice")
        seen.add(rf.name)

    # code features
    seen = set()
    for i, cf in enumerate(kb.code_features):
        loc = f"code_features#features[{i}]"
        if cf.name in seen:
            report.add("DuplicateIdentifier", loc, f"code feature {cf.name!r} declared twice")
        seen.add(cf.name)
        if cf.mode == "rule" and (cf.pattern is None or cf.prompt_spec is not None):
            report.add("InvalidFeatureSpec", loc, "rule mode requires pattern and no prompt_spec")
        if cf.mode == "assisted" and (cf.prompt_spec is None or cf.pattern is not None):
            report.add("InvalidFeatureSpec", loc, "assisted mode requires prompt_spec and no pattern")
        if not cf.domain.contains(cf.default):
            report.add("InvalidFeatureSpec", loc, f"default {cf.default!r} outside value domain")

    # derived fields: parse, reference check, acyclicity
    derived_names = [df.name for df in kb.derived_fields]
    seen = set()
    nodes = {}
    for i, df in enumerate(kb.derived_fields):
        loc = f"derived_fields#fields[{i}]({df.name})"
        if df.name in seen:
            report.add("DuplicateIdentifier", loc, f"derived field {df.name!r} defined twice")
        seen.add(df.name)
        node = _check_expression(report, df.expression, loc, declared)
        if node is not None:
            nodes[df.name] = node
    try:
        resolve_evaluation_order(kb)
    except CyclicDependency as exc:
        report.add("CyclicDependency", "derived_fields", str(exc))

    # headroom tiers
    seen = set()
    for i, tier in enumerate(kb.headroom_tiers):
        loc = f"headroom_tiers#tiers[{i}]({tier.indicator})"
        if tier.indicator in seen:
            report.add("DuplicateIdentifier", loc, f"indicator {tier.indicator!r} tiered twice")
        seen.add(tier.indicator)
        if tier.indicator not in declared:
            report.add("DanglingReference", loc, f"unknown indicator {tier.indicator!r}")
        if len(tier.tier_labels) != len(tier.thresholds) + 1:
            report.add("InvalidTierSpec", loc, "need exactly one more label than thresholds")
        if any(b <= a for a, b in zip(tier.thresholds, tier.thresholds[1:])):
            report.add("InvalidTierSpec", loc, "thresholds must be strictly increasing")

    # predicates
    predicate_names = set()
    for i, pred in enumerate(kb.predicates):
        loc = f"ncu_predicates#predicates[{i}]({pred.name})"
        if pred.name in predicate_names:
            report.add("DuplicateIdentifier", loc, f"predicate {pred.name!r} defined twice")
        predicate_names.add(pred.name)
        _check_expression(report, pred.expression, loc, declared)

    # priority rules
    ordering = kb.priority.ordering
    seen = set()
    for label in ordering:
        if label in seen:
            report.add("DuplicateIdentifier", "bottleneck_priority_rules#ordering",
                       f"bottleneck type {label!r} listed twice")
        seen.add(label)
    for i, override in enumerate(kb.priority.overrides):
        loc = f"bottleneck_priority_rules#overrides[{i}]"
        if override.condition not in predicate_names:
            report.add("DanglingReference", loc, f"unknown predicate {override.condition!r}")
        if override.promote not in ordering:
            report.add("DanglingReference", loc, f"unknown bottleneck type {override.promote!r}")

    # veto rules
    method_ids = {m.method_id for m in kb.methods}
    seen = set()
    for i, rule in enumerate(kb.vetoes):
        loc = f"global_forbidden_rules#rules[{i}]({rule.name})"
        if rule.name in seen:
            report.add("DuplicateIdentifier", loc, f"veto rule {rule.name!r} defined twice")
        seen.add(rule.name)
        if rule.condition not in predicate_names:
            # not a predicate reference: must be a valid inline expression
            _check_expression(report, rule.condition, loc, declared)
        for method in rule.forbidden_methods:
            if method not in method_ids:
                report.add("DanglingReference", loc, f"unknown method {method!r}")

    # decision table
    tier_by_indicator = {t.indicator: t for t in kb.headroom_tiers}
    seen_case_ids = set()
    seen_ranks = set()
    referenced_methods = set()
    for i, case in enumerate(kb.decision_cases):
        loc = f"decision_table#cases[{i}]({case.case_id})"
        if case.case_id in seen_case_ids:
            report.add("DuplicateIdentifier", loc, f"case_id {case.case_id!r} used twice")
        seen_case_ids.add(case.case_id)
        key = (case.bottleneck_type, case.rank)
        if key in seen_ranks:
            report.add("DuplicateIdentifier", loc,
                       f"rank {case.rank} duplicated within {case.bottleneck_type!r}")
        seen_ranks.add(key)
        if case.bottleneck_type not in ordering:
            report.add("DanglingReference", loc,
                       f"bottleneck type {case.bottleneck_type!r} not in priority ordering")
        for pred in list(case.ncu_signature) + list(case.gate_when):
            if pred not in predicate_names:
                report.add("DanglingReference", loc, f"unknown predicate {pred!r}")
        for indicator, tiers in case.headroom_condition:
            tier_def = tier_by_indicator.get(indicator)
            if tier_def is None:
                report.add("DanglingReference", loc, f"indicator {indicator!r} has no tier definition")
                continue
            for label in tiers:
                if label not in tier_def.tier_labels:
                    report.add("DanglingReference", loc,
                               f"tier {label!r} not defined for indicator {indicator!r}")
        if not case.allowed_methods:
            report.add("EmptyMethods", loc, "allowed_methods must not be empty")
        for method in case.allowed_methods:
            referenced_methods.add(method)
            if method not in method_ids:
                report.add("DanglingReference", loc, f"unknown method {method!r}")

    # bottleneck coverage
    covered = {c.bottleneck_type for c in kb.decision_cases}
    for label in ordering:
        if label not in covered:
            report.add("UncoveredBottleneck", "decision_table",
                       f"bottleneck type {label!r} has no decision case")

    # method knowledge
    seen = set()
    for i, method in enumerate(kb.methods):
        loc = f"llm_assist#methods[{i}]({method.method_id})"
        if method.method_id in seen:
            report.add("DuplicateIdentifier", loc, f"method {method.method_id!r} defined twice")
        seen.add(method.method_id)
    for rule in kb.vetoes:
        referenced_methods.update(rule.forbidden_methods)
    for method in kb.methods:
        if method.method_id not in referenced_methods:
            report.add("OrphanMethod", f"llm_assist({method.method_id})",
                       f"method {method.method_id!r} is never referenced", severity="warning")

    return report


def _check_namespace_collisions(kb: KnowledgeBase, report: ValidationReport) -> None:
    owners: Dict[str, str] = {}
    groups = [
        ("field_mapping", [e.standard_field for e in kb.field_mapping]),
        ("run_features_schema", [f.name for f in kb.run_features]),
        ("code_features", [f.name for f in kb.code_features]),
        ("derived_fields", [f.name for f in kb.derived_fields]),
    ]
    for section, names in groups:
        for name in set(names):
            if name in owners and owners[name] != section:
                report.add("DuplicateIdentifier", section,
                           f"identifier {name!r} already declared in {owners[name]}")
            owners.setdefault(name, section)


# --- evaluation order ------------------------------------------------------


def resolve_evaluation_order(kb: KnowledgeBase) -> List[str]:
    """Topological order of derived fields (dependencies evaluate first).

    Uses a stable Kahn walk: among ready fields, declaration order wins, so
    the result is deterministic for a given KB.  Raises
    :class:`~kernelsmith.errors.CyclicDependency` when fields form a cycle.
    """
    names = [df.name for df in kb.derived_fields]
    name_set = set(names)
    deps: Dict[str, set] = {}
    for df in kb.derived_fields:
        try:
            node = expressions.parse(df.expression)
        except ExpressionSyntaxError:
            deps[df.name] = set()  # malformed expressions are reported by validation
            continue
        # self-references stay in the set so they surface as cycles
        deps[df.name] = expressions.referenced_identifiers(node) & name_set

    order: List[str] = []
    placed: set = set()
    remaining = list(names)
    while remaining:
        progressed = False
        for name in list(remaining):
            if deps[name] <= placed:
                order.append(name)
                placed.add(name)
                remaining.remove(name)
                progressed = True
        if not progressed:
            raise CyclicDependency(sorted(remaining))
    return order
