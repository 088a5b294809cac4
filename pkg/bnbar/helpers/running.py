from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Dict, Iterable, Optional


@dataclass(slots=True)
class RunningStats:
    """
    Running mean / second central moment of one estimated quantity, plus the
    running mean squared error against a fixed truth.

    Updates are order dependent in floating point; feed values in replication
    order to keep reports byte-stable.
    """
    truth: Optional[float] = None
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    mse: float = 0.0

    def update(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        # incremental mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)
        if self.truth is not None:
            err = x - self.truth
            self.mse += (err * err - self.mse) / self.n

    def extend(self, xs: Iterable[float]) -> None:
        for x in xs:
            self.update(float(x))

    @property
    def sd(self) -> float:
        # population SD, so rmse^2 = sd^2 + bias^2 holds exactly in theory
        return math.sqrt(self.m2 / self.n) if self.n else float("nan")

    @property
    def bias(self) -> float:
        if self.truth is None or self.n == 0:
            return float("nan")
        return self.mean - self.truth

    @property
    def rmse(self) -> float:
        if self.truth is None or self.n == 0:
            return float("nan")
        return math.sqrt(self.mse)


class StatsTable:
    """Named RunningStats, created on first use."""
    def __init__(self, truths: Optional[Dict[str, float]] = None):
        self._truths = dict(truths or {})
        self._stats: Dict[str, RunningStats] = {}

    def __len__(self) -> int:
        return len(self._stats)

    def __contains__(self, key: str) -> bool:
        return key in self._stats

    def get_or_create(self, key: str) -> RunningStats:
        v = self._stats.get(key)
        if v is None:
            v = RunningStats(truth=self._truths.get(key))
            self._stats[key] = v
        return v

    def update(self, key: str, x: float) -> RunningStats:
        v = self.get_or_create(key)
        v.update(x)
        return v

    def items(self):
        return self._stats.items()
