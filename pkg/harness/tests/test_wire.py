"""Wire behavior: one response per request, in order, never a crash."""

import io
import json
import subprocess
import sys

from kernelharness.server import serve

from sources import BROKEN, IDENTITY, request


def run_serve(lines):
    stdin = io.StringIO("".join(line + "\n" for line in lines))
    stdout = io.StringIO()
    status = serve(stdin=stdin, stdout=stdout)
    assert status == 0
    return [json.loads(line) for line in stdout.getvalue().splitlines()]


def test_every_line_gets_exactly_one_response_in_order():
    lines = [
        json.dumps(request(IDENTITY, kernel_id="first")),
        "this is not json",
        json.dumps({"protocol": "0", "action": "evaluate"}),
        json.dumps(request(BROKEN, kernel_id="last")),
    ]
    responses = run_serve(lines)
    assert len(responses) == 4
    assert responses[0]["kernel_id"] == "first"
    assert responses[0]["correct"] is True
    assert "invalid JSON" in responses[1]["error"]
    assert "unsupported protocol" in responses[2]["error"]
    assert responses[3]["kernel_id"] == "last"
    assert responses[3]["compiled"] is False
    assert all(doc["protocol"] == "1" for doc in responses)


def test_blank_lines_are_ignored():
    responses = run_serve(["", "   ", json.dumps(request(IDENTITY))])
    assert len(responses) == 1


def test_empty_input_exits_clean():
    assert run_serve([]) == []


def test_subprocess_round_trip():
    proc = subprocess.Popen(
        [sys.executable, "-m", "kernelharness"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    try:
        proc.stdin.write(json.dumps(request(IDENTITY, kernel_id="wire")) + "\n")
        proc.stdin.flush()
        response = json.loads(proc.stdout.readline())
        assert response["kernel_id"] == "wire"
        assert response["compiled"] is True and response["correct"] is True
        assert response["speedup"] > 0
    finally:
        proc.stdin.close()
        assert proc.wait(timeout=60) == 0
