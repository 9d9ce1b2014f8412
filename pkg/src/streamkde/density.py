"""Density estimators: the recursive stochastic-approximation KDE with
exact resume, the batch Horvitz-Thompson KDE, and the recursive pilot
estimators of f(x) and f''(x) used by plug-in bandwidth selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .kernels import GAUSSIAN, Kernel
from .propensity import Observation, PropensityModel, columns
from .schedules import BandwidthSchedule, StepsizeSchedule, recursion_weights

# Pilot sequences: stepsizes 1.36/n and 1.48/n (clamped at n = 1) with
# bandwidth decay exponents 2/5 and 3/14 for the density and curvature
# pilots respectively.
PILOT_DENSITY_STEPSIZE = StepsizeSchedule(1.36)
PILOT_CURVATURE_STEPSIZE = StepsizeSchedule(1.48)
PILOT_DENSITY_EXPONENT = 2.0 / 5.0
PILOT_CURVATURE_EXPONENT = 3.0 / 14.0


class DegenerateDataError(ValueError):
    """Data carries no usable spread (all observed values equal)."""


def pilot_scale(observed_values: Sequence[float]) -> float:
    """Robust scale min{s_hat, IQR/1.349} over the observed values."""
    v = np.asarray(observed_values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least 2 observed values")
    s = float(np.std(v, ddof=1))
    q1, q3 = np.percentile(v, [25.0, 75.0])
    scale = min(s, (q3 - q1) / 1.349)
    if scale <= 0:
        raise DegenerateDataError("observed values have zero spread")
    return scale


@dataclass(frozen=True)
class EvaluationGrid:
    points: np.ndarray
    spacing: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.size < 2:
            raise ValueError("grid needs at least 2 points")
        steps = np.diff(pts)
        if np.any(steps <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.max(np.abs(steps - self.spacing)) > 1e-12 * max(1.0, abs(self.spacing)):
            raise ValueError("grid spacing must be uniform")

    @classmethod
    def linspace(cls, lo: float, hi: float, m: int) -> "EvaluationGrid":
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise ValueError("invalid grid range")
        pts = np.linspace(lo, hi, m)
        return cls(points=pts, spacing=(hi - lo) / (m - 1))

    def __len__(self) -> int:
        return self.points.size


@dataclass
class DensityEstimate:
    grid: EvaluationGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def at(self, x: float) -> float:
        """Linear interpolation between grid points."""
        return float(np.interp(x, self.grid.points, self.values))


class RecursiveKdeState:
    """Grid of evaluation points with the current recursive estimate.

    One observation costs O(|grid|); the state can be checkpointed and
    resumed with ``resume`` and the continuation is bit-identical to an
    uninterrupted run (same code path, same operation order).
    """

    def __init__(self, grid: EvaluationGrid, stepsize: StepsizeSchedule,
                 bandwidth: BandwidthSchedule,
                 propensity: Optional[PropensityModel] = None,
                 kernel: Kernel = GAUSSIAN):
        self.grid = grid
        self.stepsize = stepsize
        self.bandwidth = bandwidth
        self.propensity = propensity
        self.kernel = kernel
        self.values = np.zeros(len(grid))
        self.n = 0
        self.kernel_evals = 0

    def update(self, obs: Observation, pi: Optional[float] = None) -> "RecursiveKdeState":
        n = self.n + 1
        gamma = self.stepsize.stepsize(n)
        self.values *= 1.0 - gamma
        if obs.delta == 1:
            if pi is None:
                pi = 1.0 if self.propensity is None else \
                    float(self.propensity.scores([obs])[0])
            if not (0.0 < pi <= 1.0):
                raise ValueError("propensity score must lie in (0, 1]")
            h = self.bandwidth.value(n)
            kernel_term = self.kernel.eval((self.grid.points - obs.x) / h)
            self.kernel_evals += len(self.grid)
            self.values += gamma / (pi * h) * kernel_term
        self.n = n
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite state values")
        return self

    def query(self, x: float) -> float:
        """Off-grid value by linear interpolation."""
        return float(np.interp(x, self.grid.points, self.values))

    def copy(self) -> "RecursiveKdeState":
        dup = RecursiveKdeState(self.grid, self.stepsize, self.bandwidth,
                                self.propensity, self.kernel)
        dup.values = self.values.copy()
        dup.n = self.n
        dup.kernel_evals = self.kernel_evals
        return dup

    def estimate(self, meta: Optional[dict] = None) -> DensityEstimate:
        base = {"estimator": "recursive", "n": self.n,
                "gamma0": self.stepsize.gamma0,
                "bandwidth_coefficient": self.bandwidth.coefficient}
        if meta:
            base.update(meta)
        return DensityEstimate(self.grid, self.values.copy(), base)


def recursive_update(state: RecursiveKdeState, obs: Observation,
                     pi: Optional[float] = None) -> RecursiveKdeState:
    return state.update(obs, pi)


def resume(state: RecursiveKdeState, tail: Sequence[Observation],
           pis: Optional[Sequence[float]] = None) -> RecursiveKdeState:
    """Continue a checkpointed recursive estimator over the tail of the
    stream; equivalent to having never stopped."""
    if pis is not None and len(pis) != len(tail):
        raise ValueError("pis must match tail length")
    for i, obs in enumerate(tail):
        state.update(obs, None if pis is None else float(pis[i]))
    return state


def evaluate_recursive(data: Sequence[Observation], scores: np.ndarray,
                       stepsize: StepsizeSchedule, bandwidth: BandwidthSchedule,
                       points: np.ndarray, kernel: Kernel = GAUSSIAN) -> np.ndarray:
    """Closed-form evaluation of the recursive estimator at ``points``.

    Algebraically identical to running ``recursive_update`` over the whole
    stream (the recursion unrolls to a weighted sum of the innovations);
    used as the fast path in Monte Carlo loops.
    """
    x, delta, _ = columns(data)
    n = x.size
    if n == 0:
        raise ValueError("empty data")
    scores = np.asarray(scores, dtype=float)
    w = recursion_weights(stepsize.stepsizes(n))
    h = bandwidth.values(n)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    u = (points[:, None] - x[None, :]) / h[None, :]
    terms = kernel.eval(u) * (delta / (scores * h))[None, :]
    return terms @ w


def evaluate_batch(data: Sequence[Observation], scores: np.ndarray, h: float,
                   points: np.ndarray, kernel: Kernel = GAUSSIAN) -> np.ndarray:
    """Batch Horvitz-Thompson KDE values at ``points`` for given scores."""
    if len(data) == 0:
        raise ValueError("empty data")
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    x, delta, _ = columns(data)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    u = (points[:, None] - x[None, :]) / h
    return kernel.eval(u) @ (delta / np.asarray(scores, dtype=float)) / (x.size * h)


def batch_ht_kde(data: Sequence[Observation], h: float,
                 propensity: PropensityModel, grid: EvaluationGrid,
                 kernel: Kernel = GAUSSIAN) -> DensityEstimate:
    """Nonrecursive Horvitz-Thompson KDE with a single bandwidth."""
    if len(data) == 0:
        raise ValueError("empty data")
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    scores = propensity.scores(data)
    values = evaluate_batch(data, scores, h, grid.points, kernel)
    meta = {"estimator": "batch", "n": len(data), "bandwidth": h,
            "propensity": propensity.describe()}
    return DensityEstimate(grid, values, meta)


def _pilot_sums(data: Sequence[Observation], at, scores: np.ndarray,
                stepsize: StepsizeSchedule, exponent: float,
                kernel: Kernel, second: bool):
    """Recursive pilot weighted sums at the query points.

    Returns (values, diag) where values_k-weighted sum uses weights
    w_k = beta_k * prod_{j>k}(1 - beta_j) and diag is the matching
    squared-weight sum needed for the diagonal of the I2 double sum.
    """
    x, delta, _ = columns(data)
    n = x.size
    if n < 1:
        raise ValueError("empty data")
    scores = np.asarray(scores, dtype=float)
    observed = x[delta == 1]
    scale = pilot_scale(observed)
    k = np.arange(1, n + 1, dtype=float)
    b = scale * k ** (-exponent)
    w = recursion_weights(stepsize.stepsizes(n))
    at_arr = np.atleast_1d(np.asarray(at, dtype=float))
    u = (at_arr[:, None] - x[None, :]) / b[None, :]
    if second:
        kv = kernel.eval_second_derivative(u)
        innov = kv * (delta / (scores * b ** 3))[None, :]
    else:
        kv = kernel.eval(u)
        innov = kv * (delta / (scores * b))[None, :]
    values = innov @ w
    diag = (innov * innov) @ (w * w)
    return values, diag


def local_pilot_density(data: Sequence[Observation], at, scores: np.ndarray,
                        kernel: Kernel = GAUSSIAN):
    """Recursive pilot estimate of f at the query point(s)."""
    values, _ = _pilot_sums(data, at, scores, PILOT_DENSITY_STEPSIZE,
                            PILOT_DENSITY_EXPONENT, kernel, second=False)
    return float(values[0]) if np.isscalar(at) else values


def local_pilot_second_derivative(data: Sequence[Observation], at,
                                  scores: np.ndarray,
                                  kernel: Kernel = GAUSSIAN):
    """Recursive pilot estimate of f'' at the query point(s)."""
    values, _ = _pilot_sums(data, at, scores, PILOT_CURVATURE_STEPSIZE,
                            PILOT_CURVATURE_EXPONENT, kernel, second=True)
    return float(values[0]) if np.isscalar(at) else values


def batch_pilot_density(data: Sequence[Observation], at, scores: np.ndarray,
                        b: float, kernel: Kernel = GAUSSIAN):
    """Batch pilot estimate of f at the query point(s) with bandwidth b."""
    if b <= 0:
        raise ValueError("pilot bandwidth must be positive")
    x, delta, _ = columns(data)
    at_arr = np.atleast_1d(np.asarray(at, dtype=float))
    kv = kernel.eval((at_arr[:, None] - x[None, :]) / b)
    values = kv @ (delta / np.asarray(scores, dtype=float)) / (x.size * b)
    return float(values[0]) if np.isscalar(at) else values


def batch_pilot_second_derivative(data: Sequence[Observation], at,
                                  scores: np.ndarray, b_prime: float,
                                  kernel: Kernel = GAUSSIAN):
    """Batch pilot estimate of f'' at the query point(s)."""
    if b_prime <= 0:
        raise ValueError("pilot bandwidth must be positive")
    x, delta, _ = columns(data)
    at_arr = np.atleast_1d(np.asarray(at, dtype=float))
    kv = kernel.eval_second_derivative((at_arr[:, None] - x[None, :]) / b_prime)
    values = kv @ (delta / np.asarray(scores, dtype=float)) / (x.size * b_prime ** 3)
    return float(values[0]) if np.isscalar(at) else values
