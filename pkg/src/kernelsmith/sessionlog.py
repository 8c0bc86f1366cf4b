"""Append-only session logs: one header, one document per round, one final.

Layout under the sessions directory:

    <task_id>/session.json      config, seeds with sources, selection
    <task_id>/rounds/001.json   full round record: plan, candidate source,
                                evaluation outcome, promotion, decision trace
    <task_id>/final.json        best/base summary

Everything is written as canonical JSON (sorted keys, two-space indent,
trailing newline) so identical sessions produce byte-identical files.  The
round documents carry complete candidate sources and, for optimize rounds,
the full decision trace, which is what makes interrupted sessions resumable
and recorded decisions re-explainable.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Optional

from .errors import MalformedDocument


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_document(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(doc))


def read_document(path: Path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise MalformedDocument(str(path), f"invalid JSON: {exc}") from exc


class SessionLog:
    """Reader/writer for one task's session directory."""

    def __init__(self, sessions_dir: Path, task_id: str):
        self.root = Path(sessions_dir) / task_id
        self.rounds_dir = self.root / "rounds"

    @property
    def header_path(self) -> Path:
        return self.root / "session.json"

    @property
    def final_path(self) -> Path:
        return self.root / "final.json"

    def round_path(self, index: int) -> Path:
        return self.rounds_dir / f"{index:03d}.json"

    def exists(self) -> bool:
        return self.header_path.is_file()

    def write_header(self, doc: Dict) -> None:
        write_document(self.header_path, doc)

    def write_round(self, index: int, doc: Dict) -> None:
        write_document(self.round_path(index), doc)

    def write_final(self, doc: Dict) -> None:
        write_document(self.final_path, doc)

    def read_header(self) -> Dict:
        return read_document(self.header_path)

    def read_final(self) -> Optional[Dict]:
        if not self.final_path.is_file():
            return None
        return read_document(self.final_path)

    def round_indices(self) -> List[int]:
        if not self.rounds_dir.is_dir():
            return []
        return sorted(
            int(p.stem) for p in self.rounds_dir.glob("*.json") if p.stem.isdigit()
        )

    def read_round(self, index: int) -> Dict:
        return read_document(self.round_path(index))

    def read_rounds(self) -> List[Dict]:
        return [self.read_round(i) for i in self.round_indices()]
