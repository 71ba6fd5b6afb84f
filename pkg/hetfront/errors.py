"""
Exception hierarchy for hetfront.
"""

from typing import Any, Optional


class HetfrontError(Exception):
    """Base class for all errors raised by hetfront."""


class ConfigError(HetfrontError, ValueError):
    """Invalid parameters or configuration file."""


class HeterogeneityError(ConfigError):
    """Malformed heterogeneity description or unknown example id."""


class HistoryError(HetfrontError, ValueError):
    """Front history evaluated outside its domain or built inconsistently."""


class QuadratureError(HetfrontError, RuntimeError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float = float("nan"), error: float = float("nan")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class RiccatiError(HetfrontError, RuntimeError):
    """A Riccati slope crossed zero (positivity of 1 + f1 violated)."""


class RootFindingError(HetfrontError, RuntimeError):
    """Root refinement did not converge."""


class RootBracketError(RootFindingError):
    """No sign change inside the admissible bracket."""


class FrontNotFoundError(HetfrontError, ValueError):
    """The U-profile does not define a single front position."""

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial


class SolverError(HetfrontError, RuntimeError):
    """Time integration failed."""


class DomainExhaustedError(SolverError):
    """The front came too close to the computational boundary."""

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial


class ShootingError(HetfrontError, RuntimeError):
    """Orbit integration or speed bracketing failed in the wave ODE."""


class AlignmentError(HetfrontError, ValueError):
    """Trajectories cannot be aligned or have no common window."""
