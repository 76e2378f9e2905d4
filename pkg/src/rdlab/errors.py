"""Exception types raised across the lab."""


class RdlabError(Exception):
    """Base class for every error raised by rdlab."""


class GridError(RdlabError, ValueError):
    """Invalid grid construction or a field that does not match its grid."""


class ReactionEvaluationError(RdlabError, ArithmeticError):
    """A nonlinearity returned NaN or Inf."""

    def __init__(self, message, t=None, u=None):
        super().__init__(message)
        self.t = t
        self.u = u


class RegularizationError(RdlabError, ValueError):
    """Unsupported regularization request (bad exponent range, dimension too high)."""


class BlowUpError(RdlabError, ArithmeticError):
    """A time step produced non-finite values.

    ``trajectory`` is filled in by :func:`rdlab.solver.integrate` with the
    frames recorded before the failure.
    """

    def __init__(self, message, t=None, component=None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.component = component
        self.trajectory = trajectory


class PreconditionError(RdlabError, ValueError):
    """An experiment was asked to run on inputs violating its hypotheses."""

    def __init__(self, message, component=None, node=None):
        super().__init__(message)
        self.component = component
        self.node = node


class ConfigError(RdlabError, ValueError):
    """Malformed or incomplete run configuration."""
