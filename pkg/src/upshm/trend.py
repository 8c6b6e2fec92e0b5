"""Kendall's tau trend of a rate time series.

The score is the plain S statistic (concordant minus discordant pairs against
time order) with tied values contributing zero; no tau-b tie correction.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

NEUTRAL_TREND = 0.5
DEFAULT_WINDOW = 10


def _count_inversions(values: list) -> int:
    """Number of pairs i < j with values[i] > values[j] (strict), by merge sort."""
    n = len(values)
    if n < 2:
        return 0
    buf = list(values)
    tmp = [None] * n
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if buf[j] < buf[i]:
                    tmp[k] = buf[j]
                    inversions += mid - i
                    j += 1
                else:
                    tmp[k] = buf[i]
                    i += 1
                k += 1
            tmp[k:k + mid - i] = buf[i:mid]
            k += mid - i
            tmp[k:k + hi - j] = buf[j:hi]
        buf, tmp = tmp, buf
        width *= 2
    return inversions


def kendall_score(series: Sequence[float]) -> int:
    """S = sum over i < j of sign(x_j - x_i), in O(n log n).

    Pairs split into increasing, decreasing and tied; with D the decreasing
    (inversion) count and T the tied count, S = C(n,2) - T - 2D.
    """
    values = list(series)
    n = len(values)
    if n < 2:
        raise ValueError(f"need at least 2 values, got {n}")
    counts: dict = {}
    for x in values:
        counts[x] = counts.get(x, 0) + 1
    ties = sum(c * (c - 1) // 2 for c in counts.values())
    return n * (n - 1) // 2 - ties - 2 * _count_inversions(values)


def kendall_tau(series: Sequence[float]) -> float:
    n = len(series)
    if n < 2:
        raise ValueError(f"need at least 2 values, got {n}")
    return kendall_score(series) / (n * (n - 1) / 2)


def normalize_tau(tau: float) -> float:
    """Map tau from [-1, 1] onto [0, 1] with the affine (tau + 1) / 2."""
    if not -1.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [-1, 1], got {tau}")
    return (tau + 1.0) / 2.0


@dataclass(frozen=True)
class RateSeries:
    values: tuple[float, ...]
    window: int | None = DEFAULT_WINDOW

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if self.window is not None and self.window < 2:
            raise ValueError("window must be >= 2 (or None for the full history)")
        if any(not v > 0 for v in self.values):
            raise ValueError("rates must be positive")

    def recent(self) -> tuple[float, ...]:
        if self.window is None:
            return self.values
        return self.values[-self.window:]


def trend_of_window(history: RateSeries) -> float:
    """Normalized tau over the most recent ``window`` rates; 0.5 until two exist."""
    recent = history.recent()
    if len(recent) < 2:
        return NEUTRAL_TREND
    return normalize_tau(kendall_tau(recent))
