from __future__ import annotations

from typing import Optional


class ParameterDomainError(ValueError):
    """A distribution or recursion parameter is outside its domain."""


class MomentUndefinedError(ValueError):
    """Requested moment is infinite for the given tail parameter."""


class NonStationaryError(ValueError):
    """Spec fails the strict stationarity check and no override was given."""


class SeriesMismatchError(ValueError):
    """Fits being compared were not produced from the same series."""


class SeriesFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class TruncationError(RuntimeError):
    """
    The cdf walk hit the support cap before reaching the requested mass.
    Heavy tails (alpha close to 1) make this reachable.
    """
    def __init__(self, y_reached: int, cumulative: float, target: float):
        self.y_reached = int(y_reached)
        self.cumulative = float(cumulative)
        self.target = float(target)
        super().__init__(
            f"cdf reached {cumulative:.15f} at y={y_reached} without hitting {target:.15f}; "
            "tail too heavy for the support cap"
        )


class FilterError(FloatingPointError):
    def __init__(self, t: int, value: float):
        self.t = int(t)
        self.value = float(value)
        super().__init__(f"non-finite log-likelihood term at t={t} (value={value})")


class ClampWarning(RuntimeWarning):
    """log(lambda) was clamped inside the score-driven recursion."""


class EstimationWarning(UserWarning):
    """Fit finished but its normal-theory output should not be trusted as-is."""
