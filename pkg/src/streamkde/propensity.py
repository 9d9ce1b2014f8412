"""Propensity-score estimation for missing-at-random streams.

Three estimators: the empirical proportion of observed items, the
Nadaraya-Watson local mean, and its semi-recursive variant with a
per-observation bandwidth. Every emitted score is clamped to
[PROPENSITY_FLOOR, 1] so that inverse-propensity weights stay bounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .kernels import GAUSSIAN, Kernel
from .schedules import BandwidthSchedule

PROPENSITY_FLOOR = 0.05


class DegenerateWindowError(ValueError):
    """All kernel weights vanished at the query point."""


@dataclass(frozen=True)
class Observation:
    """One stream element.

    ``t`` is the underlying value; it is None when the item is missing
    (simulation code may keep the true value in ``t_oracle`` for metrics,
    but no estimator reads it). ``x`` is delta * t, zero when missing.
    ``aux`` is an optional auxiliary covariate driving MAR missingness.
    """

    delta: int
    x: float
    t: Optional[float] = None
    aux: Optional[float] = None
    t_oracle: Optional[float] = None

    def __post_init__(self):
        if self.delta not in (0, 1):
            raise ValueError("delta must be 0 or 1")
        if self.delta == 1 and self.t is not None and self.x != self.t:
            raise ValueError("observed items require x == t")
        if self.delta == 0 and self.x != 0.0:
            raise ValueError("missing items require x == 0")
        if not np.isfinite(self.x):
            raise ValueError("x must be finite")

    @property
    def conditioning_value(self) -> float:
        """Covariate the propensity smoother conditions on: the auxiliary
        variable when present, else x."""
        return self.aux if self.aux is not None else self.x


def columns(data: Sequence[Observation]):
    """(x, delta, cond) arrays for a sequence of observations."""
    x = np.array([o.x for o in data], dtype=float)
    delta = np.array([o.delta for o in data], dtype=float)
    cond = np.array([o.conditioning_value for o in data], dtype=float)
    return x, delta, cond


def empirical_proportion(data: Sequence[Observation]) -> float:
    """Mean of the missingness indicators.

    The ratio-of-indicators estimator over exact ties collapses to this
    for continuous data, where ties occur with probability zero.
    """
    if len(data) == 0:
        raise ValueError("empirical proportion needs at least one observation")
    return float(np.mean([o.delta for o in data]))


def _clamp(p: float, floor: float) -> float:
    return float(min(max(p, floor), 1.0))


def nw_propensity(data: Sequence[Observation], at: float, h: float,
                  kernel: Kernel = GAUSSIAN,
                  floor: float = PROPENSITY_FLOOR) -> float:
    """Nadaraya-Watson local mean of delta at the query point."""
    if not np.isfinite(at):
        raise ValueError("query point must be finite")
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    _, delta, cond = columns(data)
    w = kernel.eval((at - cond) / h)
    den = float(np.sum(w))
    if den < 1e-300:
        raise DegenerateWindowError(f"no kernel mass at query point {at}")
    return _clamp(float(np.sum(delta * w)) / den, floor)


class RecursiveNWPropensity:
    """Semi-recursive Nadaraya-Watson smoother of delta.

    Each observation enters the numerator and denominator sums with its
    own bandwidth h_j, frozen at consumption time; the sums are symmetric
    in the observations, so queries do not depend on arrival order.
    """

    def __init__(self, bandwidth: BandwidthSchedule, kernel: Kernel = GAUSSIAN,
                 floor: float = PROPENSITY_FLOOR):
        self.bandwidth = bandwidth
        self.kernel = kernel
        self.floor = floor
        self._cond: list[float] = []
        self._delta: list[float] = []
        self._h: list[float] = []

    @property
    def n(self) -> int:
        return len(self._cond)

    def append(self, obs: Observation) -> None:
        index = self.n + 1
        self._cond.append(obs.conditioning_value)
        self._delta.append(float(obs.delta))
        self._h.append(self.bandwidth.value(index))

    def extend(self, data: Sequence[Observation]) -> "RecursiveNWPropensity":
        for obs in data:
            self.append(obs)
        return self

    def query(self, at: float) -> float:
        if not np.isfinite(at):
            raise ValueError("query point must be finite")
        if self.n == 0:
            raise ValueError("no observations appended")
        cond = np.asarray(self._cond)
        h = np.asarray(self._h)
        w = self.kernel.eval((at - cond) / h) / h
        den = float(np.sum(w))
        if den < 1e-300:
            raise DegenerateWindowError(f"no kernel mass at query point {at}")
        num = float(np.sum(np.asarray(self._delta) * w))
        return _clamp(num / den, self.floor)


# ---------------------------------------------------------------------------
# Model objects: a uniform "scores per observation" surface for the
# estimators, so simulation code can swap the oracle in for the estimate.
# ---------------------------------------------------------------------------

class PropensityModel:
    """Base: produces a score pi_hat_i in (0, 1] for each observation."""

    def scores(self, data: Sequence[Observation]) -> np.ndarray:
        raise NotImplementedError

    def mean_score(self, data: Sequence[Observation]) -> float:
        """Population-level scalar used by the bandwidth formulas."""
        return float(np.mean(self.scores(data)))

    def describe(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class KnownPropensity(PropensityModel):
    """Oracle scores: a constant or a function of the underlying value."""

    value: float | Callable[[np.ndarray], np.ndarray] = 1.0
    floor: float = PROPENSITY_FLOOR

    def scores(self, data):
        if callable(self.value):
            t = np.array([o.t_oracle if o.t_oracle is not None else o.x
                          for o in data], dtype=float)
            raw = np.asarray(self.value(t), dtype=float)
        else:
            raw = np.full(len(data), float(self.value))
        return np.clip(raw, self.floor, 1.0)


@dataclass(frozen=True)
class EmpiricalPropensity(PropensityModel):
    """Constant score: the observed fraction (MCAR fallback)."""

    floor: float = PROPENSITY_FLOOR

    def scores(self, data):
        p = _clamp(empirical_proportion(data), self.floor)
        return np.full(len(data), p)


@dataclass(frozen=True)
class NWPropensity(PropensityModel):
    """Batch Nadaraya-Watson scores at each observation's covariate."""

    bandwidth: float
    kernel: Kernel = GAUSSIAN
    floor: float = PROPENSITY_FLOOR

    def scores(self, data):
        _, delta, cond = columns(data)
        u = (cond[:, None] - cond[None, :]) / self.bandwidth
        w = self.kernel.eval(u)
        den = w.sum(axis=1)
        if np.any(den < 1e-300):
            raise DegenerateWindowError("no kernel mass at some observation")
        return np.clip(w @ delta / den, self.floor, 1.0)


@dataclass(frozen=True)
class RecursiveNWPropensityModel(PropensityModel):
    """Semi-recursive scores at each observation's covariate, using the
    full sample (the smoother sums run over j = 1..n for every i)."""

    schedule: BandwidthSchedule
    kernel: Kernel = GAUSSIAN
    floor: float = PROPENSITY_FLOOR

    def scores(self, data):
        _, delta, cond = columns(data)
        h = self.schedule.values(len(data))
        u = (cond[:, None] - cond[None, :]) / h[None, :]
        w = self.kernel.eval(u) / h[None, :]
        den = w.sum(axis=1)
        if np.any(den < 1e-300):
            raise DegenerateWindowError("no kernel mass at some observation")
        return np.clip(w @ delta / den, self.floor, 1.0)
