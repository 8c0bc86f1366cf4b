"""Seeded knowledge-base defects and the violation code each must raise.

Each defect is a small targeted mutation of the shipped KB bundle.  The
mutated bundle must still load (mutations break semantics, not shape) and
validation must flag it with the expected code.  Shared by the knowledge
tests and the acceptance suite.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Callable

from kernelsmith.knowledge import kb_from_bundle, kb_to_bundle, load_default_kb


def default_bundle() -> dict:
    return kb_to_bundle(load_default_kb())


def _case(bundle: dict, case_id: str) -> dict:
    for case in bundle["decision_table"]["cases"]:
        if case["case_id"] == case_id:
            return case
    raise KeyError(case_id)


def _predicate(bundle: dict, name: str) -> dict:
    for pred in bundle["ncu_predicates"]["predicates"]:
        if pred["name"] == name:
            return pred
    raise KeyError(name)


def _derived(bundle: dict, name: str) -> dict:
    for item in bundle["derived_fields"]["fields"]:
        if item["name"] == name:
            return item
    raise KeyError(name)


@dataclass(frozen=True)
class SeededDefect:
    name: str
    expected_code: str
    apply: Callable[[dict], None]


def _dangling_predicate_in_signature(b):
    _case(b, "mb_tile")["ncu_signature"].append("no_such_predicate")


def _dangling_gate_predicate(b):
    _case(b, "ml_reduce")["gate_when"].append("ghost_gate")


def _dangling_method_in_case(b):
    _case(b, "cb_general")["allowed_methods"].append("warp_drive")


def _dangling_method_in_veto(b):
    b["global_forbidden_rules"]["rules"][0]["forbidden_methods"].append("flux_capacitor")


def _dangling_bottleneck_in_case(b):
    _case(b, "mb_general")["bottleneck_type"] = "cache_bound"


def _dangling_override_predicate(b):
    b["bottleneck_priority_rules"]["overrides"][0]["condition"] = "ghost_condition"


def _dangling_override_target(b):
    b["bottleneck_priority_rules"]["overrides"][0]["promote"] = "warp_bound"


def _dangling_derived_reference(b):
    _derived(b, "arithmetic_intensity")["expression"] = "safe_div(ffma_inst_count, ghost_bytes, 0)"


def _dangling_tier_indicator(b):
    b["headroom_tiers"]["tiers"][0]["indicator"] = "phantom_pct"


def _dangling_headroom_tier_label(b):
    _case(b, "mb_tile")["headroom_condition"] = {"dram_throughput_pct": ["Ultra"]}


def _cyclic_derived_pair(b):
    # imbalance_score already reads compute_memory_ratio; close the loop
    _derived(b, "compute_memory_ratio")["expression"] = "imbalance_score + 1"


def _self_referential_derived(b):
    _derived(b, "stall_pressure_pct")["expression"] = "stall_pressure_pct + 1"


def _duplicate_case_id(b):
    cases = b["decision_table"]["cases"]
    cases[1]["case_id"] = cases[0]["case_id"]


def _duplicate_rank(b):
    _case(b, "mb_coalesce")["rank"] = 1  # collides with mb_tile


def _duplicate_predicate_name(b):
    preds = b["ncu_predicates"]["predicates"]
    preds.append({"name": preds[0]["name"], "expression": "1 > 0"})


def _duplicate_method_id(b):
    methods = b["llm_assist"]["methods"]
    methods.append(copy.deepcopy(methods[0]))


def _duplicate_standard_field(b):
    b["field_mapping"]["entries"].append(
        {"raw": "dram__throughput.avg.pct_of_peak_sustained_active",
         "field": "dram_throughput_pct", "unit": "%", "scale": 1.0}
    )


def _uncovered_bottleneck(b):
    cases = b["decision_table"]["cases"]
    cases[:] = [c for c in cases if c["bottleneck_type"] != "launch_overhead_bound"]


def _orphan_method(b):
    b["llm_assist"]["methods"].append(
        {"method_id": "hypothetical_prefetch_v2", "rationale": "unused",
         "implementation_cues": [], "expected_benefit": "", "preconditions_note": ""}
    )


def _malformed_predicate_expression(b):
    _predicate(b, "dram_pressure_high")["expression"] = "dram_throughput_pct >"


def _empty_methods_case(b):
    _case(b, "oc_block")["allowed_methods"] = []


DEFECTS = [
    SeededDefect("dangling_predicate_in_signature", "DanglingReference", _dangling_predicate_in_signature),
    SeededDefect("dangling_gate_predicate", "DanglingReference", _dangling_gate_predicate),
    SeededDefect("dangling_method_in_case", "DanglingReference", _dangling_method_in_case),
    SeededDefect("dangling_method_in_veto", "DanglingReference", _dangling_method_in_veto),
    SeededDefect("dangling_bottleneck_in_case", "DanglingReference", _dangling_bottleneck_in_case),
    SeededDefect("dangling_override_predicate", "DanglingReference", _dangling_override_predicate),
    SeededDefect("dangling_override_target", "DanglingReference", _dangling_override_target),
    SeededDefect("dangling_derived_reference", "DanglingReference", _dangling_derived_reference),
    SeededDefect("dangling_tier_indicator", "DanglingReference", _dangling_tier_indicator),
    SeededDefect("dangling_headroom_tier_label", "DanglingReference", _dangling_headroom_tier_label),
    SeededDefect("cyclic_derived_pair", "CyclicDependency", _cyclic_derived_pair),
    SeededDefect("self_referential_derived", "CyclicDependency", _self_referential_derived),
    SeededDefect("duplicate_case_id", "DuplicateIdentifier", _duplicate_case_id),
    SeededDefect("duplicate_rank", "DuplicateIdentifier", _duplicate_rank),
    SeededDefect("duplicate_predicate_name", "DuplicateIdentifier", _duplicate_predicate_name),
    SeededDefect("duplicate_method_id", "DuplicateIdentifier", _duplicate_method_id),
    SeededDefect("duplicate_standard_field", "DuplicateIdentifier", _duplicate_standard_field),
    SeededDefect("uncovered_bottleneck", "UncoveredBottleneck", _uncovered_bottleneck),
    SeededDefect("orphan_method", "OrphanMethod", _orphan_method),
    SeededDefect("malformed_predicate_expression", "MalformedExpression", _malformed_predicate_expression),
]

# the twenty above are the seeded-defect suite; a couple more defects are
# exercised separately in the knowledge tests (scales, tier specs, defaults)

EXTRA_DEFECTS = [
    SeededDefect("zero_scale", "InvalidScale",
                 lambda b: b["field_mapping"]["entries"][0].__setitem__("scale", 0)),
    SeededDefect("decreasing_thresholds", "InvalidTierSpec",
                 lambda b: b["headroom_tiers"]["tiers"][0].__setitem__("thresholds", [80.0, 40.0])),
    SeededDefect("label_count_mismatch", "InvalidTierSpec",
                 lambda b: b["headroom_tiers"]["tiers"][1].__setitem__("labels", ["Low", "High"])),
    SeededDefect("default_outside_domain", "InvalidFeatureSpec",
                 lambda b: _feature(b, "precision_mode").__setitem__("default", "fp8")),
    SeededDefect("empty_methods_case", "EmptyMethods", _empty_methods_case),
]


def _feature(bundle: dict, name: str) -> dict:
    for feat in bundle["code_features"]["features"]:
        if feat["name"] == name:
            return feat
    raise KeyError(name)


def seeded_kb(defect: SeededDefect):
    """Apply one defect to a fresh copy of the default bundle and load it."""
    bundle = default_bundle()
    defect.apply(bundle)
    return kb_from_bundle(bundle, origin=f"<seeded:{defect.name}>")
