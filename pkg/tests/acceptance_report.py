"""Shared sink for the acceptance gate's verdict lines.

test_acceptance.py records one line per criterion here; conftest.py echoes
the collected lines into the terminal summary so they are visible even when
every test passes and pytest swallows captured stdout.
"""

from typing import List

LINES: List[str] = []


def record(line: str) -> None:
    LINES.append(line)
