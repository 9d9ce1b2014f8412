"""Monte Carlo harness: per-cell replication loops for the global MWISE
comparison, the local MSE comparison, and the timing benchmark.

Replications are embarrassingly parallel; each draws its RNG stream from
(seed, rep_index), so summaries do not depend on the worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import bandwidth as bw
from .density import (
    EvaluationGrid,
    RecursiveKdeState,
    batch_pilot_density,
    batch_pilot_second_derivative,
    evaluate_batch,
    evaluate_recursive,
    local_pilot_density,
    local_pilot_second_derivative,
)
from .kernels import GAUSSIAN
from .metrics import (
    CellSummary,
    ReplicationReport,
    TimingReport,
    summarize_cell,
    timing_benchmark,
    wise,
)
from .propensity import (
    EmpiricalPropensity,
    KnownPropensity,
    NWPropensity,
    PropensityModel,
    RecursiveNWPropensityModel,
    columns,
)
from .schedules import BandwidthSchedule, StepsizeSchedule
from .simulate import (
    MissingnessSpec,
    SimulationConfig,
    replication_grid_range,
    sample_arrays,
    sample_replication,
)

GAMMA0_BY_ESTIMATOR = {"recursive1": 1.0, "recursive2": 0.8}
ESTIMATORS = ("nonrecursive", "recursive1", "recursive2")


def propensity_model(data, missing: MissingnessSpec,
                     recursive: bool) -> PropensityModel:
    """Propensity estimator for one replication: the semi-recursive (or
    batch) Nadaraya-Watson smoother on the auxiliary covariate under MAR,
    the empirical proportion under MCAR, and the trivial constant 1 for
    complete data."""
    if missing.kind == "none" or missing.rate == 0.0:
        return KnownPropensity(1.0)
    if missing.kind == "mcar":
        return EmpiricalPropensity()
    _, _, cond = columns(data)
    scale = bw.pilot_scale(cond)
    if recursive:
        return RecursiveNWPropensityModel(BandwidthSchedule(scale, 0.2))
    return NWPropensity(scale * len(data) ** (-0.2))


def _mse_errors(values, points, truth):
    return {x0: float((v - truth.density(x0)) ** 2)
            for x0, v in zip(points, values)}


def run_global_replication(config: SimulationConfig, rep_index: int,
                           estimators: Sequence[str] = ESTIMATORS,
                           mse_points: Sequence[float] = ()) -> dict:
    """One replication of the global-estimation protocol: sample, select
    plug-in bandwidths, run each estimator over the per-replication grid,
    and score WISE against the true density."""
    truth = config.distribution
    data = sample_replication(config, rep_index)
    t, delta, _ = sample_arrays(config, rep_index)
    lo, hi = replication_grid_range(config, t, delta)
    grid = EvaluationGrid.linspace(lo, hi, config.grid_points)
    constants = GAUSSIAN.constants()
    n = config.n
    scale = bw.pilot_scale(t[delta == 1])
    out = {}

    recursive_names = [e for e in estimators if e in GAMMA0_BY_ESTIMATOR]
    if recursive_names:
        t0 = time.perf_counter()
        model = propensity_model(data, config.missing, recursive=True)
        scores = model.scores(data)
        pi_hat = float(np.mean(scores))
        functionals = bw.recursive_functionals(data, model, scores=scores)
        shared = time.perf_counter() - t0
        for name in recursive_names:
            gamma0 = GAMMA0_BY_ESTIMATOR[name]
            t0 = time.perf_counter()
            choice = bw.select_global_bandwidth(functionals, constants,
                                                pi_hat, gamma0=gamma0,
                                                scale=scale)
            values = evaluate_recursive(data, scores,
                                        StepsizeSchedule(gamma0),
                                        choice.schedule(), grid.points)
            elapsed = shared + (time.perf_counter() - t0)
            est = _as_estimate(grid, values)
            out[name] = ReplicationReport(
                wise=wise(est, truth),
                squared_errors=_mse_errors(
                    np.interp(mse_points, grid.points, values), mse_points,
                    truth) if mse_points else {},
                wall_time=elapsed,
                meta={"bandwidth_coefficient": choice.coefficient,
                      "pi_hat": pi_hat, "i1": functionals.i1,
                      "i2": functionals.i2})

    if "nonrecursive" in estimators:
        t0 = time.perf_counter()
        model = propensity_model(data, config.missing, recursive=False)
        scores = model.scores(data)
        pi_hat = float(np.mean(scores))
        functionals = bw.batch_functionals(data, model, scores=scores)
        choice = bw.select_global_bandwidth(functionals, constants, pi_hat,
                                            gamma0=None, scale=scale)
        h = choice.value(n)
        values = evaluate_batch(data, scores, h, grid.points)
        elapsed = time.perf_counter() - t0
        est = _as_estimate(grid, values)
        out["nonrecursive"] = ReplicationReport(
            wise=wise(est, truth),
            squared_errors=_mse_errors(
                np.interp(mse_points, grid.points, values), mse_points,
                truth) if mse_points else {},
            wall_time=elapsed,
            meta={"bandwidth": h, "pi_hat": pi_hat,
                  "i1": functionals.i1, "i2": functionals.i2})
    return out


def _as_estimate(grid, values):
    from .density import DensityEstimate
    return DensityEstimate(grid, np.asarray(values))


def run_global_cell(config: SimulationConfig,
                    estimators: Sequence[str] = ESTIMATORS,
                    mse_points: Sequence[float] = (),
                    threads: int = 1) -> dict[str, CellSummary]:
    """All replications of one (distribution, missingness, n) cell."""
    indices = range(config.replications)

    def work(rep):
        return run_global_replication(config, rep, estimators, mse_points)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, indices))
    else:
        results = [work(rep) for rep in indices]

    summaries = {}
    for name in estimators:
        reports = [r[name] for r in results]
        summaries[name] = summarize_cell(reports, meta={
            "estimator": name, "n": config.n,
            "distribution": config.distribution.name,
            "missing": config.missing.kind, "rate": config.missing.rate,
            "rho": config.missing.rho, "replications": config.replications})
    return summaries


# ---------------------------------------------------------------------------
# Local estimation
# ---------------------------------------------------------------------------

@dataclass
class LocalCellResult:
    kind: str
    x0: float
    n: int
    mean_bandwidth: float
    relative_root_mse: float
    mse: float
    fallback_count: int
    meta: dict = field(default_factory=dict)


def _local_fallback(data) -> float:
    x, delta, _ = columns(data)
    return bw.pilot_bandwidth(x[delta == 1], 0.2, len(data))


def run_local_replication(config: SimulationConfig, rep_index: int,
                          x0: float, kind: str):
    """One replication of the local protocol. ``kind`` is "RPI"
    (recursive plug-in) or "NRPI" (nonrecursive plug-in). Returns
    (estimate at x0, selected bandwidth, used_fallback)."""
    data = sample_replication(config, rep_index)
    n = config.n
    constants = GAUSSIAN.constants()
    recursive = kind == "RPI"
    model = propensity_model(data, config.missing, recursive=recursive)
    scores = model.scores(data)
    pi_hat = float(np.mean(scores))

    if recursive:
        f_hat = local_pilot_density(data, x0, scores)
        f2_hat = local_pilot_second_derivative(data, x0, scores)
    else:
        x, delta, _ = columns(data)
        observed = x[delta == 1]
        b = bw.pilot_bandwidth(observed, 2.0 / 5.0, n)
        b_prime = bw.pilot_bandwidth(observed, 3.0 / 14.0, n)
        f_hat = batch_pilot_density(data, x0, scores, b)
        f2_hat = batch_pilot_second_derivative(data, x0, scores, b_prime)

    used_fallback = False
    if f_hat <= 0:
        h = _local_fallback(data)
        used_fallback = True
    else:
        try:
            h = bw.local_bandwidth(f_hat, f2_hat, constants, pi_hat, n,
                                   kind="recursive" if recursive else "batch",
                                   fallback=_local_fallback(data))
        except bw.InflectionFallbackError as err:
            h = err.suggested
            used_fallback = True
    x, delta, _ = columns(data)
    lead = (3.0 / 10.0) ** 0.2 if recursive else 1.0
    h_max = bw.CAP_MULTIPLIER * lead \
        * bw.max_smoothing_coefficient(bw.pilot_scale(x[delta == 1]),
                                       constants) * n ** (-0.2)
    h = min(h, h_max)

    if recursive:
        schedule = BandwidthSchedule(h * n ** 0.2, 0.2)
        value = float(evaluate_recursive(data, scores, StepsizeSchedule(1.0),
                                         schedule, np.array([x0]))[0])
    else:
        value = float(evaluate_batch(data, scores, h, np.array([x0]))[0])
    return value, h, used_fallback


def run_local_cell(config: SimulationConfig, x0: float, kind: str,
                   threads: int = 1) -> LocalCellResult:
    truth = config.distribution
    indices = range(config.replications)

    def work(rep):
        return run_local_replication(config, rep, x0, kind)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, indices))
    else:
        results = [work(rep) for rep in indices]

    values = np.array([r[0] for r in results])
    bandwidths = np.array([r[1] for r in results])
    fallbacks = sum(1 for r in results if r[2])
    fx = float(truth.density(x0))
    mse = float(np.mean((values - fx) ** 2))
    return LocalCellResult(
        kind=kind, x0=x0, n=config.n,
        mean_bandwidth=float(np.mean(bandwidths)),
        relative_root_mse=float(np.sqrt(mse) / fx),
        mse=mse, fallback_count=fallbacks,
        meta={"distribution": truth.name,
              "replications": config.replications})


# ---------------------------------------------------------------------------
# Timing benchmark wiring
# ---------------------------------------------------------------------------

def run_timing_benchmark(config: SimulationConfig, n1_fraction: float = 0.5,
                         repetitions: int = 20,
                         gamma0: float = 1.0) -> TimingReport:
    """Resume-versus-recompute comparison on one replication's data.

    The recursive path checkpoints at n1 (propensity, plug-in selection
    and the first n1 updates all happen before the clock starts) and is
    timed only over the tail updates; the batch path is timed over its
    full pipeline at size n, which is what a nonrecursive estimator must
    redo when data arrives.
    """
    data = sample_replication(config, 0)
    t, delta, _ = sample_arrays(config, 0)
    lo, hi = replication_grid_range(config, t, delta)
    grid = EvaluationGrid.linspace(lo, hi, config.grid_points)
    constants = GAUSSIAN.constants()

    phases = {}

    def build_recursive_state(head, tail):
        t0 = time.perf_counter()
        model = propensity_model(head, config.missing, recursive=True)
        scores = model.scores(head)
        pi_hat = float(np.mean(scores))
        phases["recursive_propensity"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        functionals = bw.recursive_functionals(head, model, scores=scores)
        x, delta, _ = columns(head)
        choice = bw.select_global_bandwidth(functionals, constants, pi_hat,
                                            gamma0=gamma0,
                                            scale=bw.pilot_scale(x[delta == 1]))
        phases["recursive_plugin"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        state = RecursiveKdeState(grid, StepsizeSchedule(gamma0),
                                  choice.schedule())
        for obs, pi in zip(head, scores):
            state.update(obs, float(pi))
        phases["recursive_head_pass"] = time.perf_counter() - t0
        # Tail scores reuse the checkpoint-time propensity level; under
        # MCAR/complete data that is a scalar.
        tail_scores = np.full(len(tail), pi_hat if config.missing.kind != "none"
                              and config.missing.rate > 0 else 1.0)
        return state, tail_scores

    def run_batch_pipeline(full):
        model = propensity_model(full, config.missing, recursive=False)
        scores = model.scores(full)
        pi_hat = float(np.mean(scores))
        functionals = bw.batch_functionals(full, model, scores=scores)
        x, delta, _ = columns(full)
        choice = bw.select_global_bandwidth(functionals, constants, pi_hat,
                                            gamma0=None,
                                            scale=bw.pilot_scale(x[delta == 1]))
        return evaluate_batch(full, scores, choice.value(len(full)),
                              grid.points)

    report = timing_benchmark(data, grid, build_recursive_state,
                              run_batch_pipeline, n1_fraction, repetitions)
    report.phases.update(phases)
    return report
