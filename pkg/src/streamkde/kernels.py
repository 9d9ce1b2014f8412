"""Kernel functions and their analytic constants.

Every estimator and every bandwidth formula downstream consumes a kernel
only through ``eval``, ``eval_second_derivative`` and ``constants``, so
adding a new family means adding one enum member and its closed forms here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class KernelFamily(enum.Enum):
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelConstants:
    """Analytic constants of a kernel: R(K) = int K^2, mu2 = int u^2 K,
    and theta = R(K)^(4/5) * mu2^(2/5)."""

    r_k: float
    mu2: float

    def __post_init__(self):
        if self.r_k <= 0 or self.mu2 <= 0:
            raise ValueError("kernel constants must be positive")

    @property
    def theta(self) -> float:
        return self.r_k ** 0.8 * self.mu2 ** 0.4


@dataclass(frozen=True)
class Kernel:
    family: KernelFamily = KernelFamily.GAUSSIAN

    def eval(self, u):
        """K(u). Accepts scalars or arrays; rejects non-finite input."""
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise ValueError("kernel argument must be finite")
        out = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
        return float(out) if out.ndim == 0 else out

    def eval_second_derivative(self, u):
        """K''(u) = (u^2 - 1) K(u) for the Gaussian family."""
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise ValueError("kernel argument must be finite")
        out = (u * u - 1.0) * _INV_SQRT_2PI * np.exp(-0.5 * u * u)
        return float(out) if out.ndim == 0 else out

    def constants(self) -> KernelConstants:
        # R(K) = 1/(2 sqrt(pi)), mu2 = 1 for the standard normal kernel.
        return KernelConstants(r_k=1.0 / (2.0 * math.sqrt(math.pi)), mu2=1.0)


GAUSSIAN = Kernel(KernelFamily.GAUSSIAN)
