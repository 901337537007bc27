"""Exception hierarchy shared by every sobonet module."""
from __future__ import annotations

from typing import Any, Dict, List, Optional


class SobonetError(RuntimeError):
    """Base class for all runtime failures raised by the library."""


class InvalidInputError(SobonetError, ValueError):
    """Raised when arguments have the wrong shape, range or dimension."""


class UnsupportedOrderError(InvalidInputError):
    """Raised when a derivative order is requested that the network cannot provide."""


class PreconditionError(InvalidInputError):
    """Raised when a construction's stated precondition does not hold for the arguments."""


class OutOfDomainError(InvalidInputError):
    """Raised when a point lies outside the subdomain an approximant is defined on."""


class BudgetExceededError(InvalidInputError):
    """Raised when a network breaks an enforced width/depth budget."""


class ConstructionFailedError(SobonetError):
    """Raised when a builder cannot reach its accuracy target."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class QuadratureError(SobonetError):
    """Raised when the averaged-Taylor quadrature does not settle."""

    def __init__(self, message: str, last_change: float = float("nan")):
        super().__init__(message)
        self.last_change = last_change


class DivergenceError(SobonetError):
    """Raised when training blows up; the loss trajectory is attached."""

    def __init__(self, message: str, trajectory: Optional[List[float]] = None):
        super().__init__(message)
        self.trajectory = list(trajectory or [])
