"""Knowledge-base loading, validation, serialization, and field ordering."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from kernelsmith import knowledge as K
from kernelsmith.errors import CyclicDependency, MalformedDocument, MissingSection
from kernelsmith.knowledge import (
    DerivedFieldDef,
    HeadroomTierDef,
    KnowledgeBase,
    PriorityRule,
    kb_from_bundle,
    kb_to_bundle,
    load_default_kb,
    load_knowledge_base,
    resolve_evaluation_order,
    save_knowledge_base,
    validate_knowledge_base,
)

from kb_mutations import DEFECTS, EXTRA_DEFECTS, default_bundle, seeded_kb


# --- loading ---------------------------------------------------------------


def test_default_kb_loads_and_validates_clean():
    kb = load_default_kb()
    report = validate_knowledge_base(kb)
    assert report.ok(), [str(v) for v in report.violations]
    assert len(kb.decision_cases) >= 10
    assert len(kb.methods) == 15
    assert len(kb.code_features) == 18


def test_missing_section_is_reported_by_name(tmp_path):
    kb = load_default_kb()
    save_knowledge_base(kb, tmp_path)
    (tmp_path / "decision_table.json").unlink()
    with pytest.raises(MissingSection) as exc:
        load_knowledge_base(tmp_path)
    assert "decision_table" in str(exc.value)


def test_unrecognized_section_file_is_rejected(tmp_path):
    save_knowledge_base(load_default_kb(), tmp_path)
    (tmp_path / "extra_notes.json").write_text("{}", encoding="utf-8")
    with pytest.raises(MalformedDocument) as exc:
        load_knowledge_base(tmp_path)
    assert "extra_notes" in str(exc.value)


def test_invalid_json_is_rejected_with_location(tmp_path):
    save_knowledge_base(load_default_kb(), tmp_path)
    (tmp_path / "llm_assist.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(MalformedDocument) as exc:
        load_knowledge_base(tmp_path)
    assert "llm_assist" in str(exc.value)


def test_single_file_bundle_loads(tmp_path):
    bundle = default_bundle()
    path = tmp_path / "kb.json"
    path.write_text(json.dumps(bundle), encoding="utf-8")
    kb = load_knowledge_base(path)
    assert kb == load_default_kb()


def test_bundle_with_unknown_top_level_section_is_rejected():
    bundle = default_bundle()
    bundle["secret_notes"] = {}
    with pytest.raises(MalformedDocument):
        kb_from_bundle(bundle)


def test_inconsistent_schema_versions_are_rejected():
    bundle = default_bundle()
    bundle["llm_assist"]["schema_version"] = "2"
    with pytest.raises(MalformedDocument) as exc:
        kb_from_bundle(bundle)
    assert "schema_version" in str(exc.value)


def test_unknown_keys_inside_entries_are_rejected():
    bundle = default_bundle()
    bundle["decision_table"]["cases"][0]["priority_boost"] = 9
    with pytest.raises(MalformedDocument):
        kb_from_bundle(bundle)


def test_nonexistent_path_is_rejected(tmp_path):
    with pytest.raises(MalformedDocument):
        load_knowledge_base(tmp_path / "nope")


# --- serialization ---------------------------------------------------------


def test_bundle_roundtrip_is_identity():
    kb = load_default_kb()
    assert kb_from_bundle(kb_to_bundle(kb)) == kb


def test_directory_roundtrip_is_identity(tmp_path):
    kb = load_default_kb()
    save_knowledge_base(kb, tmp_path)
    assert load_knowledge_base(tmp_path) == kb


# --- tier assignment -------------------------------------------------------


def test_lower_inclusive_boundary_goes_up():
    tier = HeadroomTierDef("x", (40.0, 80.0), ("Low", "Medium", "High"), "lower-inclusive")
    assert tier.assign(39.999) == "Low"
    assert tier.assign(40.0) == "Medium"
    assert tier.assign(80.0) == "High"
    assert tier.assign(100.0) == "High"


def test_upper_inclusive_boundary_stays_down():
    tier = HeadroomTierDef("x", (40.0, 80.0), ("Low", "Medium", "High"), "upper-inclusive")
    assert tier.assign(40.0) == "Low"
    assert tier.assign(40.001) == "Medium"
    assert tier.assign(80.0) == "Medium"
    assert tier.assign(80.001) == "High"


# --- identifier surface ----------------------------------------------------


def test_label_features_publish_boolean_indicators():
    kb = load_default_kb()
    declared = K.declared_identifiers(kb)
    assert declared["precision_mode"] == "code"
    assert declared["precision_mode_is_fp64"] == "indicator"
    assert declared["memory_access_pattern_is_strided"] == "indicator"
    assert declared["compute_memory_ratio"] == "derived"
    assert declared["dram_throughput_pct"] == "standard"
    assert declared["kernel_launch_count"] == "run"


# --- evaluation order ------------------------------------------------------


def _kb_with_fields(fields):
    return KnowledgeBase(
        field_mapping=(), run_features=(), code_features=(),
        derived_fields=tuple(fields), headroom_tiers=(),
        priority=PriorityRule(ordering=()), predicates=(), vetoes=(),
        decision_cases=(), methods=(), schema_version="1",
    )


def test_evaluation_order_respects_dependencies():
    kb = load_default_kb()
    order = resolve_evaluation_order(kb)
    assert sorted(order) == sorted(df.name for df in kb.derived_fields)
    position = {name: i for i, name in enumerate(order)}
    assert position["compute_memory_ratio"] < position["imbalance_score"]
    assert position["occupancy_gap_pct"] < position["imbalance_score"]


def test_independent_fields_keep_declaration_order():
    kb = _kb_with_fields([
        DerivedFieldDef("zeta", "a + 1"),
        DerivedFieldDef("alpha", "b + 1"),
        DerivedFieldDef("mid", "zeta + alpha"),
    ])
    assert resolve_evaluation_order(kb) == ["zeta", "alpha", "mid"]


def test_cycle_raises_with_member_names():
    kb = _kb_with_fields([
        DerivedFieldDef("p", "q + 1"),
        DerivedFieldDef("q", "p + 1"),
        DerivedFieldDef("solo", "1 + 1"),
    ])
    with pytest.raises(CyclicDependency) as exc:
        resolve_evaluation_order(kb)
    assert "p" in str(exc.value) and "q" in str(exc.value)


@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_random_dags_always_topologically_sort(data):
    n = data.draw(st.integers(min_value=1, max_value=8))
    names = [f"d{i}" for i in range(n)]
    deps = {}
    for i, name in enumerate(names):
        pool = names[:i]
        chosen = data.draw(st.sets(st.sampled_from(pool), max_size=len(pool))) if pool else set()
        deps[name] = chosen
    declaration = data.draw(st.permutations(names))
    fields = [
        DerivedFieldDef(name, " + ".join(sorted(deps[name])) if deps[name] else "1")
        for name in declaration
    ]
    order = resolve_evaluation_order(_kb_with_fields(fields))
    assert sorted(order) == sorted(names)
    position = {name: i for i, name in enumerate(order)}
    for name in names:
        for dep in deps[name]:
            assert position[dep] < position[name]


# --- seeded defects --------------------------------------------------------


@pytest.mark.parametrize("defect", DEFECTS, ids=lambda d: d.name)
def test_seeded_defect_is_flagged(defect):
    kb = seeded_kb(defect)
    report = validate_knowledge_base(kb)
    assert defect.expected_code in report.codes(), (
        f"{defect.name}: expected {defect.expected_code}, got {report.codes()}"
    )


@pytest.mark.parametrize("defect", EXTRA_DEFECTS, ids=lambda d: d.name)
def test_shape_adjacent_defects_are_flagged(defect):
    kb = seeded_kb(defect)
    report = validate_knowledge_base(kb)
    assert defect.expected_code in report.codes()


def test_orphan_method_is_warning_not_error():
    defect = next(d for d in DEFECTS if d.name == "orphan_method")
    report = validate_knowledge_base(seeded_kb(defect))
    assert not report.errors()
    assert [v.code for v in report.warnings()] == ["OrphanMethod"]


def test_violations_carry_locations():
    defect = next(d for d in DEFECTS if d.name == "dangling_method_in_case")
    report = validate_knowledge_base(seeded_kb(defect))
    hits = [v for v in report.violations if v.code == "DanglingReference"]
    assert hits and "cb_general" in hits[0].location
