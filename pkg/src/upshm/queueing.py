"""Stationary M/M/1/K quantities used to estimate overload risk."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RHO_ONE_TOL = 1e-9


@dataclass(frozen=True)
class QueueParams:
    lam: float
    mu: float
    capacity: int
    theta: int

    def __post_init__(self):
        if not (self.lam > 0 and self.mu > 0):
            raise ValueError(f"rates must be positive, got lam={self.lam}, mu={self.mu}")
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if not 1 <= self.theta <= self.capacity:
            raise ValueError(f"theta must lie in [1, {self.capacity}], got {self.theta}")


def traffic_intensity(lam: float, mu: float) -> float:
    if not mu > 0:
        raise ValueError(f"service rate must be positive, got {mu}")
    if not lam > 0:
        raise ValueError(f"arrival rate must be positive, got {lam}")
    return lam / mu


def queue_length_pmf(rho: float, capacity: int) -> np.ndarray:
    """P(v tasks in system) for v = 0..capacity.

    Uses the truncated-geometric form, switching to the uniform 1/(K+1)
    limit when rho is within ``RHO_ONE_TOL`` of 1. For rho > 1 the terms
    are rewritten in powers of 1/rho so nothing overflows at large K.
    """
    if capacity < 1 or int(capacity) != capacity:
        raise ValueError(f"capacity must be a positive integer, got {capacity}")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    k = int(capacity)
    v = np.arange(k + 1, dtype=float)
    if abs(rho - 1.0) < RHO_ONE_TOL:
        return np.full(k + 1, 1.0 / (k + 1))
    if rho < 1.0:
        # (1-rho) rho^v / (1-rho^{K+1})
        return -math.expm1(math.log(rho)) * rho**v / -math.expm1((k + 1) * math.log(rho))
    # same expression divided through by rho^{K+1}: (r-1) r^{K-v} / (1 - r^{K+1}), r = 1/rho
    r = 1.0 / rho
    return -math.expm1(math.log(r)) * r ** (k - v) / -math.expm1((k + 1) * math.log(r))


def overload_probability(params: QueueParams) -> float:
    """Stationary probability that at least ``theta`` tasks are in the system."""
    pmf = queue_length_pmf(traffic_intensity(params.lam, params.mu), params.capacity)
    return float(min(1.0, max(0.0, pmf[params.theta:].sum())))
