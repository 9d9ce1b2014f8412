"""Stepsize and bandwidth sequences, and the running products they induce.

Only power-law sequences gamma_n = gamma0 * n^(-alpha) and
h_n = coefficient * n^(-a) are constructible; log-corrected regularly
varying sequences appear only in diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class StepsizeSchedule:
    """gamma_n = gamma0 * n^(-alpha), clamped at 1.

    The clamp only bites for pilot coefficients above 1 (1.36, 1.48) at
    n = 1; there the first factor (1 - gamma_1) annihilates the history,
    which is the restart convention used throughout.
    """

    gamma0: float
    alpha: float = 1.0

    def __post_init__(self):
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if not (0.5 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (1/2, 1]")

    def stepsize(self, n: int) -> float:
        if n < 1:
            raise ValueError("stepsize index must be >= 1")
        return min(self.gamma0 * float(n) ** (-self.alpha), 1.0)

    def stepsizes(self, n: int) -> np.ndarray:
        """gamma_1 .. gamma_n as an array."""
        k = np.arange(1, n + 1, dtype=float)
        return np.minimum(self.gamma0 * k ** (-self.alpha), 1.0)

    @property
    def xi(self) -> float:
        """Limit of (n * gamma_n)^(-1): 1/gamma0 when alpha = 1, else 0."""
        return 1.0 / self.gamma0 if self.alpha == 1.0 else 0.0

    @property
    def n_gamma_limit(self) -> float:
        return self.gamma0 if self.alpha == 1.0 else math.inf


@dataclass(frozen=True)
class BandwidthSchedule:
    """h_n = coefficient * n^(-a)."""

    coefficient: float
    a: float

    def __post_init__(self):
        if self.coefficient <= 0:
            raise ValueError("bandwidth coefficient must be positive")
        if not (0.0 < self.a < 1.0):
            raise ValueError("bandwidth exponent must lie in (0, 1)")

    def value(self, n: int) -> float:
        if n < 1:
            raise ValueError("bandwidth index must be >= 1")
        return self.coefficient * float(n) ** (-self.a)

    def values(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=float)
        return self.coefficient * k ** (-self.a)


def check_compatibility(step: StepsizeSchedule, bw: BandwidthSchedule) -> None:
    """Reject (gamma0, a, alpha) triples violating the stepsize-limit
    condition lim n*gamma_n > max{2a, (alpha - a)/2}."""
    bound = max(2.0 * bw.a, (step.alpha - bw.a) / 2.0)
    if not step.n_gamma_limit > bound:
        raise ValueError(
            f"stepsize limit {step.n_gamma_limit} must exceed "
            f"max(2a, (alpha-a)/2) = {bound}"
        )


@dataclass(frozen=True)
class ProductAccumulator:
    """Running product prod_{j=j0}^{n} (1 - gamma_j), kept in log space.

    A factor gamma_j = 1 zeroes the product; the accumulator records that
    with ``zero_flag`` and restarts the retained partial product at j0 =
    j + 1 so later factors stay inspectable.
    """

    n: int = 0
    log_q: float = 0.0
    zero_flag: bool = False
    j0: int = 1

    def update(self, gamma_next: float) -> "ProductAccumulator":
        if not (0.0 < gamma_next <= 1.0):
            raise ValueError("product factor gamma must lie in (0, 1]")
        if gamma_next == 1.0:
            return replace(self, n=self.n + 1, log_q=0.0, zero_flag=True,
                           j0=self.n + 2)
        return replace(self, n=self.n + 1,
                       log_q=self.log_q + math.log1p(-gamma_next))

    @property
    def value(self) -> float:
        """Product over j = 1..n; zero if any factor was annihilating."""
        return 0.0 if self.zero_flag else math.exp(self.log_q)

    @property
    def partial_value(self) -> float:
        """Product over the retained factors j = j0..n."""
        return math.exp(self.log_q)


def update_product(acc: ProductAccumulator, gamma_next: float) -> ProductAccumulator:
    return acc.update(gamma_next)


def recursion_weights(gammas: np.ndarray) -> np.ndarray:
    """Weights w_k = gamma_k * prod_{j>k} (1 - gamma_j) such that the
    stochastic-approximation recursion g_n = (1 - gamma_n) g_{n-1} +
    gamma_n z_n (with g_0 = 0) equals sum_k w_k z_k.

    Requires gamma_j < 1 for j >= 2 (an interior annihilating factor has
    no log representation); gamma_1 = 1 is fine since no weight carries
    the factor (1 - gamma_1).
    """
    gammas = np.asarray(gammas, dtype=float)
    if gammas.size == 0:
        return gammas.copy()
    if np.any(gammas <= 0) or np.any(gammas > 1):
        raise ValueError("recursion stepsizes must lie in (0, 1]")
    if np.any(gammas[1:] >= 1.0):
        raise ValueError("interior stepsizes must be < 1")
    # suffix sums of log(1 - gamma_j) for j > k
    logs = np.log1p(-gammas[1:])
    tail = np.concatenate([np.cumsum(logs[::-1])[::-1], [0.0]])
    return gammas * np.exp(tail)


def gs_exponent_estimate(values: Sequence[float]) -> float:
    """Empirical regular-variation exponent n * (1 - v_{n-1}/v_n) at the
    last index; diagnostic only."""
    v = np.asarray(values, dtype=float)
    if v.size < 10:
        raise ValueError("need at least 10 values")
    if np.any(v <= 0):
        raise ValueError("values must be positive")
    n = v.size
    return float(n * (1.0 - v[-2] / v[-1]))
