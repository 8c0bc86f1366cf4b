"""Profiler collectors: best-effort subprocess wrappers, mocked here."""

import subprocess
from pathlib import Path

import kernelharness.profilers as profilers
from kernelharness.protocol import RequestConfig

from sources import IDENTITY, REFERENCE


def test_workload_script_is_valid_python(tmp_path):
    script = profilers._write_workload(
        tmp_path, IDENTITY, REFERENCE, RequestConfig()
    )
    compile(script.read_text(), str(script), "exec")
    assert (tmp_path / "reference.py").read_text() == REFERENCE
    assert (tmp_path / "candidate.py").read_text() == IDENTITY


def test_missing_tool_returns_none(monkeypatch):
    monkeypatch.setattr(profilers.shutil, "which", lambda name: None)
    assert profilers.collect_ncu(IDENTITY, REFERENCE, RequestConfig()) is None
    assert profilers.collect_nsys(IDENTITY, REFERENCE, RequestConfig()) is None


def test_ncu_output_passes_through(monkeypatch):
    monkeypatch.setattr(profilers.shutil, "which", lambda name: f"/usr/bin/{name}")

    def fake_run(cmd, cwd, capture_output, text, timeout):
        assert cmd[0] == "ncu" and "--csv" in cmd
        return subprocess.CompletedProcess(cmd, 0, stdout="Kernel Name,Metric\n")

    monkeypatch.setattr(profilers.subprocess, "run", fake_run)
    out = profilers.collect_ncu(IDENTITY, REFERENCE, RequestConfig())
    assert out == "Kernel Name,Metric\n"


def test_ncu_failure_returns_none(monkeypatch):
    monkeypatch.setattr(profilers.shutil, "which", lambda name: f"/usr/bin/{name}")
    monkeypatch.setattr(
        profilers.subprocess,
        "run",
        lambda cmd, **kw: subprocess.CompletedProcess(cmd, 1, stdout="", stderr="x"),
    )
    assert profilers.collect_ncu(IDENTITY, REFERENCE, RequestConfig()) is None


def test_nsys_two_stage_collection(monkeypatch):
    monkeypatch.setattr(profilers.shutil, "which", lambda name: f"/usr/bin/{name}")
    calls = []

    def fake_run(cmd, cwd, capture_output, text, timeout):
        calls.append(cmd[:2])
        if cmd[1] == "profile":
            Path(f"{cmd[3]}.nsys-rep").write_text("binary-ish")
            return subprocess.CompletedProcess(cmd, 0, stdout="")
        return subprocess.CompletedProcess(cmd, 0, stdout="Time,Name\n")

    monkeypatch.setattr(profilers.subprocess, "run", fake_run)
    out = profilers.collect_nsys(IDENTITY, REFERENCE, RequestConfig())
    assert out == "Time,Name\n"
    assert calls == [["nsys", "profile"], ["nsys", "stats"]]
