"""Evaluation backends: scripted scenarios and the stdio harness client."""

import json
import sys
import textwrap

import pytest

from kernelsmith.agents import KernelCandidate
from kernelsmith.errors import MalformedDocument, MalformedResponse, SessionFault
from kernelsmith.evaluation import (
    PROTOCOL_VERSION,
    HarnessConfig,
    Scenario,
    ScriptedEvaluator,
    SubprocessEvaluator,
    load_scenario,
    validate_response,
)


def _candidate(kernel_id):
    return KernelCandidate(kernel_id, "class ModelNew: ...", None, "generator", 0)


SCENARIO = Scenario(
    task_id="t1",
    level=1,
    reference="class Model: ...",
    baseline_latency_ms=4.0,
    evaluations={
        "s1": {
            "compile": True,
            "verify": True,
            "latency_ms": 2.0,
            "raw_metrics": {"dram__throughput.avg.pct_of_peak_sustained_elapsed": 88.0},
            "run_features": {"kernel_launch_count": 3},
        },
        "k01": {"compile": False, "compile_feedback": "error: missing ;"},
        "k02": {"compile": True, "verify": False, "verify_feedback": "diff 0.4"},
        "k03": {"compile": True, "verify": True, "latency_ms": 8.0},
    },
    default={"compile": False, "compile_feedback": "unknown kernel"},
)


def test_scripted_passing_kernel():
    result = ScriptedEvaluator(SCENARIO).evaluate(_candidate("s1"))
    assert result.passed
    assert result.speedup == pytest.approx(2.0)  # 4.0 / 2.0
    assert result.timing.mean_latency_ms == 2.0
    assert result.baseline_latency_ms == 4.0
    aggregated = result.raw_profile.aggregate()
    assert aggregated["dram__throughput.avg.pct_of_peak_sustained_elapsed"] == 88.0
    assert result.run_features.values["kernel_launch_count"] == 3


def test_scripted_compile_failure_skips_verification():
    result = ScriptedEvaluator(SCENARIO).evaluate(_candidate("k01"))
    assert not result.compiled.passed
    assert result.correct is None
    assert result.timing is None and result.speedup is None


def test_scripted_verify_failure_skips_timing():
    result = ScriptedEvaluator(SCENARIO).evaluate(_candidate("k02"))
    assert result.compiled.passed
    assert result.correct is not None and not result.correct.passed
    assert "diff 0.4" in result.correct.feedback
    assert result.timing is None and result.raw_profile is None


def test_scripted_slower_kernel_speedup_below_one():
    result = ScriptedEvaluator(SCENARIO).evaluate(_candidate("k03"))
    assert result.speedup == pytest.approx(0.5)


def test_scripted_unknown_kernel_uses_default():
    result = ScriptedEvaluator(SCENARIO).evaluate(_candidate("k99"))
    assert not result.compiled.passed
    assert "unknown kernel" in result.compiled.feedback


def test_scripted_determinism():
    evaluator = ScriptedEvaluator(SCENARIO)
    assert evaluator.evaluate(_candidate("s1")) == evaluator.evaluate(_candidate("s1"))


# --- scenario loading ------------------------------------------------------


def test_load_scenario_round_trip(tmp_path):
    doc = {
        "task_id": "t9",
        "level": 2,
        "reference": "ref",
        "baseline_latency_ms": 1.5,
        "evaluations": {"s1": {"compile": True, "verify": True, "latency_ms": 1.0}},
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    scenario = load_scenario(path)
    assert scenario.task_id == "t9"
    assert scenario.level == 2
    assert ScriptedEvaluator(scenario).evaluate(_candidate("s1")).passed


def test_load_scenario_rejects_bad_documents(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{nope")
    with pytest.raises(MalformedDocument):
        load_scenario(bad_json)
    incomplete = tmp_path / "incomplete.json"
    incomplete.write_text(json.dumps({"task_id": "t", "reference": "r"}))
    with pytest.raises(MalformedDocument):
        load_scenario(incomplete)


# --- response validation ---------------------------------------------------


def test_validate_response_cases():
    good = {
        "protocol": PROTOCOL_VERSION,
        "compiled": True,
        "compile_log": "",
        "correct": True,
        "verify_log": "",
        "mean_latency_ms": 1.0,
    }
    assert validate_response(good) == []
    assert validate_response([]) == ["response is not an object"]
    assert any("protocol" in p for p in validate_response({**good, "protocol": "9"}))
    assert any(
        "correct" in p for p in validate_response({**good, "correct": None})
    )
    failed_compile = {"protocol": PROTOCOL_VERSION, "compiled": False,
                      "compile_log": "boom", "correct": None}
    assert validate_response(failed_compile) == []
    assert any(
        "null" in p
        for p in validate_response({**failed_compile, "correct": True})
    )
    assert any(
        "mean_latency_ms" in p
        for p in validate_response({**good, "mean_latency_ms": None})
    )


# --- subprocess client -----------------------------------------------------


FAKE_HARNESS = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        kid = req["kernel_id"]
        if kid == "dead":
            sys.exit(0)
        if kid == "garbled":
            print("not json at all")
            sys.stdout.flush()
            continue
        if kid == "sick":
            print(json.dumps({"protocol": "1", "compiled": "yes", "compile_log": ""}))
            sys.stdout.flush()
            continue
        if kid == "broken":
            resp = {"protocol": "1", "compiled": False,
                    "compile_log": "error: bad", "correct": None}
        else:
            resp = {"protocol": "1", "compiled": True, "compile_log": "",
                    "correct": True, "verify_log": "",
                    "mean_latency_ms": 2.5, "baseline_latency_ms": 5.0,
                    "speedup": 2.0}
        print(json.dumps(resp))
        sys.stdout.flush()
    """
)


@pytest.fixture()
def harness_cmd(tmp_path):
    script = tmp_path / "fake_harness.py"
    script.write_text(FAKE_HARNESS)
    return [sys.executable, str(script)]


def test_subprocess_evaluator_round_trip(harness_cmd):
    evaluator = SubprocessEvaluator(harness_cmd, "ref source", HarnessConfig())
    try:
        result = evaluator.evaluate(_candidate("k01"))
        assert result.passed
        assert result.speedup == 2.0
        assert result.timing.mean_latency_ms == 2.5
        failed = evaluator.evaluate(_candidate("broken"))
        assert not failed.compiled.passed
        assert "error: bad" in failed.compiled.feedback
    finally:
        evaluator.close()


def test_subprocess_evaluator_invalid_json(harness_cmd):
    evaluator = SubprocessEvaluator(harness_cmd, "ref", HarnessConfig())
    try:
        with pytest.raises(MalformedResponse):
            evaluator.evaluate(_candidate("garbled"))
    finally:
        evaluator.close()


def test_subprocess_evaluator_schema_violation(harness_cmd):
    evaluator = SubprocessEvaluator(harness_cmd, "ref", HarnessConfig())
    try:
        with pytest.raises(MalformedResponse):
            evaluator.evaluate(_candidate("sick"))
    finally:
        evaluator.close()


def test_subprocess_evaluator_dead_process(harness_cmd):
    evaluator = SubprocessEvaluator(harness_cmd, "ref", HarnessConfig())
    try:
        with pytest.raises(SessionFault):
            evaluator.evaluate(_candidate("dead"))
    finally:
        evaluator.close()


def test_subprocess_evaluator_missing_binary():
    evaluator = SubprocessEvaluator(["/no/such/harness"], "ref")
    with pytest.raises(SessionFault):
        evaluator.evaluate(_candidate("k01"))
