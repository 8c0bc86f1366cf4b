"""Measurement harness: compile, verify, time, and profile candidate kernels.

Use as a subprocess (`kernelharness`, speaking line-delimited JSON on its
standard streams) or in-process through `evaluate(request)`.
"""

from .protocol import PROTOCOL_VERSION, validate_request
from .runner import Runner
from .server import serve

_default_runner = Runner()


def evaluate(request: dict) -> dict:
    """Evaluate one request on a shared runner (baselines stay cached)."""
    return _default_runner.evaluate(request)


__all__ = ["PROTOCOL_VERSION", "Runner", "evaluate", "serve", "validate_request"]
