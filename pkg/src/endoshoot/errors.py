"""Exception types shared across the solver stack."""


class GuidanceError(Exception):
    """Base class for all solver errors."""


class ChartSingularity(GuidanceError):
    """A chart was evaluated too close to (or past) its singular angle."""


class NonregularRegime(GuidanceError):
    """Signal: the angular costate is too small for the regular KKT branch."""


class UnsupportedNonregularArc(GuidanceError):
    """Nonregular arc with negative thrust coefficient; the saturated
    Lie-bracket branch is detected and reported but not integrated."""


class DegenerateCostate(GuidanceError):
    """Nonregular regime with vanishing speed costate; the extremal cannot
    be normal, so the run aborts with diagnostics."""


class NoConvergence(GuidanceError):
    """Shooting solver failed; carries the best iterate found."""

    def __init__(self, message, best=None, residual_norm=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm
        self.iterations = iterations


class SingularJacobian(GuidanceError):
    """Shooting Jacobian is numerically rank deficient."""


class ContinuationStalled(GuidanceError):
    """Continuation ran out of iterations or step size before reaching
    lambda = (1, 1); carries the history accumulated so far."""

    def __init__(self, message, history=None, state=None):
        super().__init__(message)
        self.history = history or []
        self.state = state


class ParseError(GuidanceError):
    """Mission configuration could not be parsed; names the offending field."""
