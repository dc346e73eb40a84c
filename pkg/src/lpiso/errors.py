"""Exception types shared across the package.

Each class carries a ``category`` string that the CLI reports on stderr and
maps to an exit code.
"""


class LpisoError(Exception):
    category = "error"


class ConfigError(LpisoError, ValueError):
    """Bad parameters or configuration records."""

    category = "usage"


class NumericalError(LpisoError, ArithmeticError):
    category = "numerical"


class TruncationError(NumericalError):
    """The truncation policy could not be met within the support cap.

    Attributes
    ----------
    tail_mass : float
        The best discarded-mass bound that was achieved.
    """

    def __init__(self, message, tail_mass=float("nan")):
        super().__init__(message)
        self.tail_mass = tail_mass


class ConvergenceError(NumericalError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


class BoundaryHitError(NumericalError):
    """An argmin landed on the edge of the search window."""

    def __init__(self, message, hits=1):
        super().__init__(message)
        self.hits = hits
