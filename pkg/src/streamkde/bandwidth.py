"""Plug-in bandwidth selection.

Estimates the density functionals I1 = int f^2 and I2 = int (f'')^2 f
with recursive or batch pilot estimators, then maps them through the
MWISE-optimal (global) or MSE-optimal (local) bandwidth formulas.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .density import (
    PILOT_CURVATURE_EXPONENT,
    PILOT_CURVATURE_STEPSIZE,
    PILOT_DENSITY_EXPONENT,
    PILOT_DENSITY_STEPSIZE,
    _pilot_sums,
    pilot_scale,
)
from .kernels import GAUSSIAN, Kernel, KernelConstants
from .propensity import Observation, PropensityModel, columns
from .schedules import BandwidthSchedule

# Floor for the functional estimates: h_n needs a positive fifth root.
EPS_I = 1e-6

# Selected bandwidths are capped at this multiple of the maximal-smoothing
# bound (times the estimator's leading constant). The cap never binds for
# plausible functional estimates (the optimal coefficient for a normal
# target sits at ~0.73 of the bound itself) but keeps a floored I2 from
# producing an absurdly oversmoothed estimate.
CAP_MULTIPLIER = 3.0


class FunctionalMethod(enum.Enum):
    RECURSIVE = "recursive"
    BATCH = "batch"


@dataclass(frozen=True)
class FunctionalEstimates:
    i1: float
    i2: float
    method: FunctionalMethod
    floored: bool = False

    def __post_init__(self):
        if self.i1 <= 0 or self.i2 <= 0:
            raise ValueError("functional estimates must be positive")


class InflectionFallbackError(ValueError):
    """Local curvature estimate is (near) zero; the MSE-optimal bandwidth
    degenerates. ``suggested`` carries a pilot-rule substitute when the
    caller provided one."""

    def __init__(self, message: str, suggested: Optional[float] = None):
        super().__init__(message)
        self.suggested = suggested


def pilot_bandwidth(observed_values: Sequence[float], beta: float, n: int) -> float:
    """Rule-of-thumb pilot: n^(-beta) * min{s_hat, IQR/1.349} over the
    observed values only."""
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(n) ** (-beta) * pilot_scale(observed_values)


def _scores(data, propensity, scores):
    if scores is not None:
        return np.asarray(scores, dtype=float)
    return propensity.scores(data)


def estimate_i1_recursive(data: Sequence[Observation],
                          propensity: PropensityModel,
                          kernel: Kernel = GAUSSIAN,
                          scores: Optional[np.ndarray] = None) -> float:
    """Recursive estimate of int f^2: the mean over the sample of the
    recursive pilot density evaluated at each X_i. Cost O(n^2)."""
    if len(data) < 2:
        raise ValueError("need at least 2 observations")
    sc = _scores(data, propensity, scores)
    x, _, _ = columns(data)
    values, _ = _pilot_sums(data, x, sc, PILOT_DENSITY_STEPSIZE,
                            PILOT_DENSITY_EXPONENT, kernel, second=False)
    return max(float(np.mean(values)), EPS_I)


def estimate_i2_recursive(data: Sequence[Observation],
                          propensity: PropensityModel,
                          kernel: Kernel = GAUSSIAN,
                          scores: Optional[np.ndarray] = None) -> float:
    """Recursive estimate of int (f'')^2 f.

    The triple sum factors per evaluation point into the squared pilot
    curvature sum minus its j = k diagonal, so the cost is O(n^2) instead
    of O(n^3). Negative raw values are floored at EPS_I.
    """
    if len(data) < 3:
        raise ValueError("need at least 3 observations")
    sc = _scores(data, propensity, scores)
    x, _, _ = columns(data)
    values, diag = _pilot_sums(data, x, sc, PILOT_CURVATURE_STEPSIZE,
                               PILOT_CURVATURE_EXPONENT, kernel, second=True)
    raw = float(np.mean(values * values - diag))
    return max(raw, EPS_I)


def estimate_i1_batch(data: Sequence[Observation], propensity: PropensityModel,
                      b: float, kernel: Kernel = GAUSSIAN,
                      scores: Optional[np.ndarray] = None) -> float:
    """Leave-one-out double-sum estimate of int f^2 with bandwidth b."""
    n = len(data)
    if n < 2:
        raise ValueError("need at least 2 observations")
    if b <= 0:
        raise ValueError("pilot bandwidth must be positive")
    sc = _scores(data, propensity, scores)
    x, delta, _ = columns(data)
    weights = delta / sc
    kv = kernel.eval((x[:, None] - x[None, :]) / b)
    total = float(kv @ weights @ np.ones(n)) - float(np.sum(np.diag(kv) * weights))
    return max(total / (n * (n - 1) * b), EPS_I)


def estimate_i2_batch(data: Sequence[Observation], propensity: PropensityModel,
                      b_prime: float, kernel: Kernel = GAUSSIAN,
                      scores: Optional[np.ndarray] = None) -> float:
    """Triple-sum (j != k) estimate of int (f'')^2 f with bandwidth
    b_prime, factored per evaluation point as a squared sum minus its
    diagonal. Floored at EPS_I."""
    n = len(data)
    if n < 3:
        raise ValueError("need at least 3 observations")
    if b_prime <= 0:
        raise ValueError("pilot bandwidth must be positive")
    sc = _scores(data, propensity, scores)
    x, delta, _ = columns(data)
    weights = delta / sc
    kv = kernel.eval_second_derivative((x[:, None] - x[None, :]) / b_prime)
    terms = kv * weights[None, :]
    s = terms.sum(axis=1)
    diag = (terms * terms).sum(axis=1)
    raw = float(np.sum(s * s - diag)) / (n ** 3 * b_prime ** 6)
    return max(raw, EPS_I)


def recursive_functionals(data, propensity, kernel: Kernel = GAUSSIAN,
                          scores=None) -> FunctionalEstimates:
    i1 = estimate_i1_recursive(data, propensity, kernel, scores)
    i2 = estimate_i2_recursive(data, propensity, kernel, scores)
    return FunctionalEstimates(i1, i2, FunctionalMethod.RECURSIVE,
                               floored=(i1 == EPS_I or i2 == EPS_I))


def batch_functionals(data, propensity, kernel: Kernel = GAUSSIAN,
                      scores=None) -> FunctionalEstimates:
    x, delta, _ = columns(data)
    observed = x[delta == 1]
    n = len(data)
    b = pilot_bandwidth(observed, PILOT_DENSITY_EXPONENT, n)
    b_prime = pilot_bandwidth(observed, PILOT_CURVATURE_EXPONENT, n)
    i1 = estimate_i1_batch(data, propensity, b, kernel, scores)
    i2 = estimate_i2_batch(data, propensity, b_prime, kernel, scores)
    return FunctionalEstimates(i1, i2, FunctionalMethod.BATCH,
                               floored=(i1 == EPS_I or i2 == EPS_I))


# ---------------------------------------------------------------------------
# Bandwidth formulas
# ---------------------------------------------------------------------------

def global_bandwidth_coefficient(i1: float, i2: float,
                                 constants: KernelConstants,
                                 gamma0: float) -> float:
    """Coefficient c of the MWISE-optimal bandwidth h_n =
    c * pi_hat^(-1/5) * n^(-1/5) for the recursive estimator with
    stepsize gamma0/n. Special cases: gamma0 = 1 gives leading constant
    (3/10)^(1/5), gamma0 = 4/5 gives 5^(-1/5)."""
    if gamma0 <= 0.4:
        raise ValueError("gamma0 must exceed 2/5")
    if i1 <= 0 or i2 <= 0:
        raise ValueError("functionals must be positive")
    lead = 2.0 ** (-0.2) * (gamma0 - 0.4) ** 0.2
    return lead * (i1 / i2 * constants.r_k / constants.mu2 ** 2) ** 0.2


def batch_bandwidth_coefficient(i1: float, i2: float,
                                constants: KernelConstants) -> float:
    """Coefficient of the MWISE-optimal bandwidth for the batch estimator."""
    if i1 <= 0 or i2 <= 0:
        raise ValueError("functionals must be positive")
    return (i1 / i2 * constants.r_k / constants.mu2 ** 2) ** 0.2


def max_smoothing_coefficient(scale: float,
                              constants: KernelConstants) -> float:
    """Maximal-smoothing upper bound on the bandwidth coefficient: no
    density with the given scale admits an MISE-optimal bandwidth above
    scale * (243 R(K) / (35 mu2^2))^(1/5) * n^(-1/5) (Terrell's bound;
    about 1.144 * scale for the Gaussian kernel). Guards against
    degenerate plug-in functionals (a floored I2 would otherwise send
    the coefficient to absurd values)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return scale * (243.0 * constants.r_k / (35.0 * constants.mu2 ** 2)) ** 0.2


@dataclass(frozen=True)
class BandwidthChoice:
    """A selected bandwidth h_n = coefficient * pi_hat^(-1/5) * n^(-1/5)."""

    coefficient: float
    pi_hat: float
    kind: str
    capped: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.coefficient) and self.coefficient > 0):
            raise ValueError("coefficient must be positive and finite")
        if not (0.0 < self.pi_hat <= 1.0):
            raise ValueError("pi_hat must lie in (0, 1]")

    def value(self, n: int) -> float:
        return self.coefficient * self.pi_hat ** (-0.2) * float(n) ** (-0.2)

    def schedule(self) -> BandwidthSchedule:
        return BandwidthSchedule(self.coefficient * self.pi_hat ** (-0.2), 0.2)


def select_global_bandwidth(functionals: FunctionalEstimates,
                            constants: KernelConstants, pi_hat: float,
                            gamma0: Optional[float] = None,
                            scale: Optional[float] = None) -> BandwidthChoice:
    """Global plug-in choice; gamma0 = None selects the batch formula.

    When the data scale is supplied, the resulting bandwidth is capped
    at the maximal-smoothing bound (``capped`` records whether the cap
    was active)."""
    if gamma0 is None:
        coeff = batch_bandwidth_coefficient(functionals.i1, functionals.i2,
                                            constants)
        lead = 1.0
        kind = "global-batch"
    else:
        coeff = global_bandwidth_coefficient(functionals.i1, functionals.i2,
                                             constants, gamma0)
        lead = 2.0 ** (-0.2) * (gamma0 - 0.4) ** 0.2
        kind = f"global-recursive(gamma0={gamma0})"
    capped = False
    if scale is not None:
        # Cap scales with the estimator's leading constant so the two
        # estimator families are truncated at the same relative level.
        bound = CAP_MULTIPLIER * lead \
            * max_smoothing_coefficient(scale, constants) * pi_hat ** 0.2
        if coeff > bound:
            coeff = bound
            capped = True
    return BandwidthChoice(coeff, pi_hat, kind, capped)


def local_bandwidth(f_hat: float, f2_hat: float, constants: KernelConstants,
                    pi_hat: float, n: int, kind: str = "recursive",
                    fallback: Optional[float] = None,
                    curvature_eps: float = 1e-4) -> float:
    """MSE-optimal bandwidth at a point from local density and curvature
    estimates. ``kind`` is "recursive" (leading constant (3/10)^(1/5)) or
    "batch" (constant 1). Raises InflectionFallbackError when the
    curvature estimate is within curvature_eps of zero."""
    if kind not in ("recursive", "batch"):
        raise ValueError("kind must be 'recursive' or 'batch'")
    if f_hat <= 0:
        raise ValueError("local density estimate must be positive")
    if abs(f2_hat) < curvature_eps:
        raise InflectionFallbackError(
            "curvature estimate near zero (inflection point)",
            suggested=fallback)
    lead = (3.0 / 10.0) ** 0.2 if kind == "recursive" else 1.0
    ratio = f_hat / f2_hat ** 2
    return lead * (ratio * constants.r_k / constants.mu2 ** 2) ** 0.2 \
        * pi_hat ** (-0.2) * float(n) ** (-0.2)


# ---------------------------------------------------------------------------
# Plug-in AMWISE
# ---------------------------------------------------------------------------

BATCH_AMWISE_CONSTANT = 5.0 / 4.0


def recursive_amwise_constant(gamma0: float) -> float:
    """Leading constant (5/4) * 2^(-4/5) * gamma0^2 (gamma0 - 2/5)^(-6/5);
    equals (5/4) 2^(-4/5) (5/3)^(6/5) at gamma0 = 1 and 5^(1/5) at 4/5."""
    if gamma0 <= 0.4:
        raise ValueError("gamma0 must exceed 2/5")
    return 1.25 * 2.0 ** (-0.8) * gamma0 ** 2 * (gamma0 - 0.4) ** (-1.2)


def plug_in_amwise(i1: float, i2: float, constants: KernelConstants,
                   pi_hat: float, n: int,
                   gamma0: Optional[float] = None) -> float:
    """Asymptotic MWISE at the plug-in bandwidth; gamma0 = None gives the
    batch estimator's value."""
    if i1 <= 0 or i2 <= 0 or not (0.0 < pi_hat <= 1.0):
        raise ValueError("invalid inputs")
    lead = BATCH_AMWISE_CONSTANT if gamma0 is None \
        else recursive_amwise_constant(gamma0)
    return lead * i1 ** 0.8 * i2 ** 0.2 * constants.theta \
        * pi_hat ** (-0.8) * float(n) ** (-0.8)
