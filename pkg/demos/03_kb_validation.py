"""Break a knowledge base on purpose and watch the validator catch it.

Loading is shape-strict but deliberately tolerant of semantic rot, so a
KB with a dangling name or a dependency cycle still loads and can be
inspected. The validator is where those problems surface, each with a
stable code and the location of the offending entry.
"""

from kernelsmith.knowledge import (
    kb_from_bundle,
    kb_to_bundle,
    load_default_kb,
    validate_knowledge_base,
)

kb = load_default_kb()
report = validate_knowledge_base(kb)
print(f"shipped KB: {len(kb.decision_cases)} cases, {len(kb.methods)} methods, "
      f"{len(kb.predicates)} predicates -> "
      f"{'clean' if report.ok() else 'NOT CLEAN'}")

# now damage it three different ways
bundle = kb_to_bundle(kb)

# 1. point a decision case at a predicate that does not exist
bundle["decision_table"]["cases"][0]["ncu_signature"].append("phantom_predicate")

# 2. tie two derived fields into a cycle
bundle["derived_fields"]["fields"].append(
    {"name": "chicken", "expression": "egg + 1"})
bundle["derived_fields"]["fields"].append(
    {"name": "egg", "expression": "chicken + 1"})

# 3. add a method nobody ever recommends
bundle["llm_assist"]["methods"].append({
    "method_id": "unused_trick",
    "rationale": "sounded good in a meeting",
    "implementation_cues": ["?"],
    "expected_benefit": "none observed",
    "preconditions_note": "never referenced by any case",
})

damaged = kb_from_bundle(bundle)
report = validate_knowledge_base(damaged)

print(f"damaged KB: {len(report.errors())} errors, {len(report.warnings())} warnings")
for violation in report.violations:
    print(f"  {violation.severity} [{violation.code}] {violation.location}: "
          f"{violation.message}")
