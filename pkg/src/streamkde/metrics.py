"""Error functionals, Monte Carlo bias/variance and CLT diagnostics, and
the resume-versus-recompute timing benchmark.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .density import DensityEstimate, EvaluationGrid, RecursiveKdeState, resume
from .simulate import DistributionSpec


@dataclass
class ReplicationReport:
    wise: float
    squared_errors: dict = field(default_factory=dict)  # x0 -> (f_hat - f)^2
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.wise < 0:
            raise ValueError("WISE must be nonnegative")


@dataclass
class CellSummary:
    mwise: float
    mwise_se: float
    mse_at_points: dict
    total_cpu_seconds: float
    meta: dict = field(default_factory=dict)


def summarize_cell(reports: Sequence[ReplicationReport],
                   meta: Optional[dict] = None) -> CellSummary:
    """Aggregate per-replication reports in replication-index order."""
    wises = np.array([r.wise for r in reports], dtype=float)
    mwise = float(np.mean(wises))
    se = float(np.std(wises, ddof=1) / np.sqrt(len(wises))) if len(wises) > 1 else 0.0
    points: dict = {}
    for x0 in (reports[0].squared_errors if reports else {}):
        errs = np.array([r.squared_errors[x0] for r in reports])
        points[x0] = (float(np.mean(errs)),
                      float(np.std(errs, ddof=1) / np.sqrt(len(errs)))
                      if len(errs) > 1 else 0.0)
    total = float(sum(r.wall_time for r in reports))
    return CellSummary(mwise, se, points, total, meta or {})


def wise(estimate: DensityEstimate, truth: DistributionSpec) -> float:
    """Weighted integrated squared error int (f_hat - f)^2 f over the grid
    by the trapezoid rule."""
    f = truth.density(estimate.grid.points)
    integrand = (estimate.values - f) ** 2 * f
    return float(np.trapezoid(integrand, dx=estimate.grid.spacing))


def mse_at(values_at_x0: Sequence[float], x0: float,
           truth: DistributionSpec) -> tuple[float, float]:
    """(MSE, sqrt(MSE)/f(x0)) over replication values at one point."""
    v = np.asarray(values_at_x0, dtype=float)
    if v.size < 2:
        raise ValueError("need at least 2 replications")
    fx = float(truth.density(x0))
    if fx <= 0:
        raise ValueError("true density must be positive at x0")
    mse = float(np.mean((v - fx) ** 2))
    return mse, float(np.sqrt(mse) / fx)


def bias_variance_decomposition(values_at_x: Sequence[float],
                                truth_at_x: float) -> tuple[float, float]:
    """(empirical bias, empirical variance) over replications."""
    v = np.asarray(values_at_x, dtype=float)
    if v.size < 100:
        raise ValueError("need at least 100 replications")
    return float(np.mean(v) - truth_at_x), float(np.var(v, ddof=1))


@dataclass(frozen=True)
class CltReport:
    skewness: float
    excess_kurtosis: float
    variance_ratio: float


def clt_diagnostics(values_at_x: Sequence[float], scale: float,
                    predicted_variance: float) -> CltReport:
    """Shape diagnostics of scale * (f_n(x) - mean), where scale is
    sqrt(gamma_n^-1 pi_n h_n); the variance ratio compares the scaled
    empirical variance against the asymptotic prediction."""
    v = np.asarray(values_at_x, dtype=float)
    if v.size < 1000:
        raise ValueError("need at least 1000 replications")
    z = scale * (v - np.mean(v))
    return CltReport(
        skewness=float(stats.skew(z)),
        excess_kurtosis=float(stats.kurtosis(z, fisher=True)),
        variance_ratio=float(np.var(z, ddof=1) / predicted_variance),
    )


# ---------------------------------------------------------------------------
# Timing benchmark
# ---------------------------------------------------------------------------

@dataclass
class TimingReport:
    recursive_resume_seconds: float
    batch_recompute_seconds: float
    ratio: float
    resume_kernel_evals: int
    phases: dict = field(default_factory=dict)


def timing_benchmark(data, grid: EvaluationGrid, build_recursive_state,
                     run_batch_pipeline, n1_fraction: float = 0.5,
                     repetitions: int = 20) -> TimingReport:
    """Median wall time of resuming the recursive estimator over the tail
    versus fully recomputing the batch pipeline at size n.

    ``build_recursive_state`` takes a prefix of the data and returns a
    ready RecursiveKdeState plus the per-observation propensity scores of
    the tail; ``run_batch_pipeline`` takes the full data and returns a
    DensityEstimate. Runs are interleaved (R, B, R, B, ...) so clock and
    cache drift cancel.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    n = len(data)
    n1 = int(n1_fraction * n)
    state0, tail_scores = build_recursive_state(data[:n1], data[n1:])
    tail = data[n1:]

    resume_times, batch_times = [], []
    evals = 0
    for _ in range(repetitions):
        st = state0.copy()
        before = st.kernel_evals
        t0 = time.perf_counter()
        resume(st, tail, tail_scores)
        resume_times.append(time.perf_counter() - t0)
        evals = st.kernel_evals - before
        t0 = time.perf_counter()
        run_batch_pipeline(data)
        batch_times.append(time.perf_counter() - t0)

    rec = float(np.median(resume_times))
    bat = float(np.median(batch_times))
    ratio = bat / rec if rec > 0 else float("inf")
    return TimingReport(rec, bat, ratio, evals)
