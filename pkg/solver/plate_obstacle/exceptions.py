"""Error types raised by the solver library."""

from typing import Optional, Sequence


class PlateObstacleError(Exception):
    """Base class for solver errors."""


class ParameterError(PlateObstacleError, ValueError):
    """Invalid argument: level, ratio, index set, decomposition size, vector shape."""


class NumericError(PlateObstacleError):
    """Non-finite coefficients or values where finite ones are required."""


class NotPositiveDefiniteError(PlateObstacleError):
    """Cholesky met a non-positive pivot."""

    def __init__(self, pivot: int, message: Optional[str] = None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot})")


class SubdomainFactorizationError(PlateObstacleError):
    """A subdomain or coarse matrix failed to factor."""

    def __init__(self, subdomain: int, cause: Exception):
        self.subdomain = subdomain
        self.cause = cause
        label = "coarse space" if subdomain < 0 else f"subdomain {subdomain}"
        super().__init__(f"factorization failed on {label}: {cause}")


class ReducedSolveError(PlateObstacleError):
    """The reduced auxiliary system of a PDAS step could not be solved."""

    def __init__(self, message: str, active: Sequence[int]):
        self.active = active
        super().__init__(f"{message} (|active set| = {len(active)})")


class TableOutputError(PlateObstacleError):
    """A table or report could not be written."""

    def __init__(self, path, cause: Exception):
        self.path = path
        self.cause = cause
        super().__init__(f"cannot write {path}: {cause}")


class TimeBudgetExceeded(PlateObstacleError):
    """The time budget ran out inside a reduced solve."""
