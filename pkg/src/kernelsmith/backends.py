"""Reasoning backends: where agent prompts go to get answered.

Two implementations behind one small interface:

    ScriptedBackend  deterministic, offline; answers come from fixture files
                     keyed by (role, prompt digest) with a synthesized
                     fallback so full pipelines run without any fixtures
    HttpBackend      chat-completion style endpoint over HTTP

The scripted backend is the test workhorse: identical (role, prompt) pairs
always produce identical output, which is what makes end-to-end session
logs byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import requests

from .errors import BackendUnavailable, MalformedResponse

ROLES = ("generator", "planner", "diagnoser", "optimizer", "repairer")


@dataclass(frozen=True)
class BackendCapabilities:
    model: str
    temperature: float = 1.0
    max_context: int = 128_000


class ReasoningBackend:
    """Interface: complete(role, prompt) -> raw response text."""

    capabilities: BackendCapabilities

    def complete(self, role: str, prompt: str) -> str:
        raise NotImplementedError


_RECOMMENDED = re.compile(r"^Recommended methods: (.+)$", re.MULTILINE)

_SEED_SOURCE = """\
import torch
import torch.nn as nn

# synthesized candidate {digest}

class ModelNew(nn.Module):
    def forward(self, *args, **kwargs):
        return args[0] if args else None
"""


class ScriptedBackend(ReasoningBackend):
    """Deterministic backend for tests and replay.

    Resolution order for a call: a fixture file
    ``<fixtures_dir>/<role>/<digest>.md`` wins; otherwise a response is
    synthesized from the prompt alone.  With ``offline=True`` a missing
    fixture raises instead, which pins a test to its recorded responses.
    """

    def __init__(self, fixtures_dir: Optional[Path] = None, offline: bool = False):
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
        self.offline = offline
        self.capabilities = BackendCapabilities(model="scripted", temperature=1.0)

    @staticmethod
    def digest(role: str, prompt: str) -> str:
        return hashlib.sha256(f"{role}\n{prompt}".encode()).hexdigest()[:16]

    def complete(self, role: str, prompt: str) -> str:
        if role not in ROLES:
            raise MalformedResponse(f"unknown agent role {role!r}")
        digest = self.digest(role, prompt)
        if self.fixtures_dir is not None:
            fixture = self.fixtures_dir / role / f"{digest}.md"
            if fixture.is_file():
                return fixture.read_text()
        if self.offline:
            raise BackendUnavailable(
                f"no fixture for role {role!r} digest {digest} in offline mode"
            )
        return self._synthesize(role, prompt, digest)

    def _synthesize(self, role: str, prompt: str, digest: str) -> str:
        if role in ("generator", "optimizer", "repairer"):
            source = _SEED_SOURCE.format(digest=digest)
            return f"Here is the candidate.\n\n```kernel\n{source}```\n"
        if role == "planner":
            match = _RECOMMENDED.search(prompt)
            listed = match.group(1).strip() if match else ""
            if not listed or listed.startswith("(none"):
                target = None
            else:
                target = listed.split(",")[0].strip()
            plan = {
                "target_method": target,
                "steps": [f"Apply {target or 'evidence-guided'} edits ({digest})."],
                "rationale": "Scripted plan synthesized from the recommendation.",
            }
            return f"```plan\n{json.dumps(plan, indent=2)}\n```\n"
        plan = {
            "suspected_root_cause": f"Scripted diagnosis {digest}.",
            "steps": ["Revisit the reported failure and correct the kernel."],
        }
        return f"```plan\n{json.dumps(plan, indent=2)}\n```\n"


class HttpBackend(ReasoningBackend):
    """Chat-completion endpoint client; configuration via constructor."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        temperature: float = 1.0,
        timeout: float = 120.0,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self.capabilities = BackendCapabilities(model=model, temperature=temperature)

    def complete(self, role: str, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.capabilities.model,
            "temperature": self.capabilities.temperature,
            "messages": [
                {"role": "system", "content": f"You are the {role} agent."},
                {"role": "user", "content": prompt},
            ],
        }
        try:
            response = requests.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout
            )
            response.raise_for_status()
            body = response.json()
        except requests.RequestException as exc:
            raise BackendUnavailable(f"backend request failed: {exc}") from exc
        except ValueError as exc:
            raise MalformedResponse(f"backend returned non-JSON body: {exc}") from exc
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected response shape: {exc}") from exc
