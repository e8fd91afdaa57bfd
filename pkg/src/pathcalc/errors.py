"""Exception taxonomy shared across the package."""


class PathcalcError(Exception):
    """Base class for all package-specific errors."""


class GridAlignmentError(PathcalcError, ValueError):
    """A time does not coincide with a grid node (or a step is not a node multiple)."""


class DomainError(PathcalcError, ValueError):
    """An argument violates a documented precondition (dimension, range, shape)."""


class BoundaryError(DomainError):
    """A forward-in-time operation was requested at the terminal horizon."""


class EvaluationError(PathcalcError, RuntimeError):
    """A functional or coefficient produced a non-finite or malformed value."""


class BlowUpError(EvaluationError):
    """The simulated state left the representable range (non-finite state)."""

    def __init__(self, message: str, node_index: int | None = None):
        super().__init__(message)
        self.node_index = node_index


class CausalityError(PathcalcError, RuntimeError):
    """A coefficient or stepper broke the stepping protocol."""


class NonConvergenceError(PathcalcError, RuntimeError):
    """An extrapolation failed its convergence budget.

    Carries the raw sequence so callers can inspect what the probe saw.
    """

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class MissingProviderError(PathcalcError, LookupError):
    """A closed-form provider (jet or measure) was requested but not declared."""


class UnknownIdError(PathcalcError, KeyError):
    """A registry lookup failed; the message lists the valid identifiers."""

    def __init__(self, kind: str, name: str, valid: list[str]):
        self.kind = kind
        self.name = name
        self.valid = sorted(valid)
        super().__init__(f"unknown {kind} {name!r}; valid: {', '.join(self.valid)}")
