"""Linear processes with dependent innovations: normalizers, simulation,
martingale approximation audits and isotonic regression under dependence."""

from . import coeffs, fbmlab, innovations, isotone, linproc, martapprox
from .errors import (BoundaryHitError, ConfigError, ConvergenceError, LpisoError,
                     NumericalError, TruncationError)

__version__ = "0.1.0"

__all__ = [
    "coeffs", "innovations", "linproc", "martapprox", "fbmlab", "isotone",
    "LpisoError", "ConfigError", "NumericalError", "TruncationError",
    "ConvergenceError", "BoundaryHitError",
]
