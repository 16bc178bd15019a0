"""Exception hierarchy shared across the package."""


class DdwError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(DdwError, ValueError):
    """Input arrays have inconsistent shapes."""


class InstanceDefect(DdwError):
    """A block or instance is structurally broken (e.g. an infeasible block)."""


class InvariantViolation(DdwError):
    """An internal consistency check failed."""


class NumericalFailure(DdwError):
    """A solver could not make progress (singular basis, iteration cap)."""


class UnboundedProblem(DdwError):
    """A QP is unbounded in the requested direction."""


class NonConvergence(DdwError):
    """ADMM hit its iteration cap before meeting the residual tolerances."""

    def __init__(self, msg, state=None, lambdas=None):
        super().__init__(msg)
        self.state = state
        self.lambdas = lambdas


class ProtocolError(DdwError):
    """Malformed frame, stale epoch, or out-of-order message."""


class GenerationFailure(DdwError):
    """No feasible instance was produced within the redraw budget."""
