"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class DomainError(ValueError):
    """A point lies outside the open domain of a potential, or has the wrong shape."""


class ConvergenceError(RuntimeError):
    """An iterative projection did not reach tolerance within the iteration budget.

    The last iterate and its residual are kept so callers can inspect or
    warm-start from them.
    """

    def __init__(self, message: str, last_iterate: np.ndarray, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.last_iterate = np.array(last_iterate, dtype=float)
        self.residual = float(residual)


class AssumptionViolation(ValueError):
    """The feasible intersection is empty, so the interaction term is undefined."""


class UndefinedDiagnosticError(ValueError):
    """A diagnostic cannot be evaluated at the requested point."""


class SamplingError(RuntimeError):
    """Feasible points could not be drawn within the attempt budget."""


class ConfigError(ValueError):
    """A run configuration is malformed; the message names the offending field."""


class BoundaryClampWarning(RuntimeWarning):
    """A projected simplex point was clamped to the interior margin."""
