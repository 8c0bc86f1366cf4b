"""Exception types shared across the package."""

from __future__ import annotations


class KernelsmithError(Exception):
    """Base class for all package-specific faults."""


# --- knowledge base loading ------------------------------------------------


class MissingSection(KernelsmithError):
    def __init__(self, name: str):
        super().__init__(f"knowledge base section missing: {name}")
        self.name = name


class MalformedDocument(KernelsmithError):
    def __init__(self, path: str, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = path
        self.detail = detail


class CyclicDependency(KernelsmithError):
    def __init__(self, names):
        names = list(names)
        super().__init__(f"cyclic derived-field dependency involving: {', '.join(names)}")
        self.names = names


# --- expressions -----------------------------------------------------------


class ExpressionSyntaxError(KernelsmithError):
    def __init__(self, text: str, position: int, detail: str):
        super().__init__(f"bad expression at column {position}: {detail} (in {text!r})")
        self.text = text
        self.position = position
        self.detail = detail


class EvaluationFault(KernelsmithError):
    """Raised only for grammar-level impossibilities (unreachable on a valid KB)."""


# --- profiling -------------------------------------------------------------


class InvalidLatency(KernelsmithError):
    pass


class EmptySamples(KernelsmithError):
    pass


# --- trajectory memory -----------------------------------------------------


class SequenceViolation(KernelsmithError):
    pass


class NoOpenChain(KernelsmithError):
    pass


# --- agents ----------------------------------------------------------------


class BackendUnavailable(KernelsmithError):
    pass


class MalformedResponse(KernelsmithError):
    pass


class PlanValidationFault(KernelsmithError):
    def __init__(self, target: str, allowed):
        super().__init__(f"plan targets {target!r}, not among recommended {sorted(allowed)}")
        self.target = target
        self.allowed = set(allowed)


# --- orchestrator / cli ----------------------------------------------------


class SessionFault(KernelsmithError):
    """Unrecoverable infrastructure failure (evaluator gone, corrupt logs)."""


class NoTrace(KernelsmithError):
    pass
