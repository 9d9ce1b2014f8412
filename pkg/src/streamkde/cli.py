"""Command-line interface: Monte Carlo table reproduction, CSV density
estimation, and the resume-versus-recompute benchmark.

Every run resolves its configuration into a manifest whose SHA-256 hash
is embedded in all outputs; re-running the same manifest reproduces
byte-identical numeric files regardless of the worker-thread count.
Timing figures are never mixed into the deterministic outputs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import click
import numpy as np

from . import bandwidth as bw
from .density import (
    DegenerateDataError,
    EvaluationGrid,
    batch_ht_kde,
    evaluate_recursive,
    pilot_scale,
)
from .experiments import (
    ESTIMATORS,
    run_global_cell,
    run_local_cell,
    run_timing_benchmark,
)
from .kernels import GAUSSIAN
from .propensity import (
    DegenerateWindowError,
    EmpiricalPropensity,
    KnownPropensity,
    Observation,
    PROPENSITY_FLOOR,
)
from .schedules import StepsizeSchedule
from .simulate import (
    Cauchy,
    Exponential,
    MissingnessSpec,
    Normal,
    NormalMixture,
    SimulationConfig,
    Weibull,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_DEGENERATE = 4

# Fixed method constants, printed into every manifest for traceability.
METHOD_DEFAULTS = {
    "kernel": "gaussian",
    "pilot_stepsize_density": 1.36,
    "pilot_stepsize_curvature": 1.48,
    "pilot_exponent_density": 0.4,
    "pilot_exponent_curvature": 3.0 / 14.0,
    "propensity_floor": PROPENSITY_FLOOR,
    "functional_floor": bw.EPS_I,
    "bandwidth_cap_multiplier": bw.CAP_MULTIPLIER,
}

TABLE_DISTRIBUTIONS = {
    1: ("normal", Normal()),
    2: ("normal-mixture", NormalMixture(0.5, 2.0, 1.0, -3.0, 1.0)),
    3: ("weibull(2,1)", Weibull(2.0, 1.0)),
}

# Local-estimation protocol: (label, distribution, evaluation points).
# Points for the single-mode targets are the 10th, 50th and 90th
# percentiles of the target distribution.
_P10, _P90 = -1.2815515655446004, 1.2815515655446004


def _table5_rows():
    mix_a = NormalMixture(0.5, -1.0, 1.0 / math.sqrt(2.0), 1.0,
                          1.0 / math.sqrt(2.0))
    mix_b = NormalMixture(0.5, -1.0, 1.0, 1.0, 1.0)
    exp = Exponential(1.0)
    cau = Cauchy()
    return [
        ("mixture-a", mix_a, [0.0]),
        ("mixture-b", mix_b, [0.0]),
        ("normal", Normal(), [_P10, 0.0, _P90]),
        ("exponential", exp, [-math.log(0.9), math.log(2.0), math.log(10.0)]),
        ("cauchy", cau, [math.tan(math.pi * (0.1 - 0.5)), 0.0,
                         math.tan(math.pi * (0.9 - 0.5))]),
    ]


def manifest_hash(manifest: dict) -> str:
    canon = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def build_manifest(command: str, resolved: dict) -> dict:
    manifest = {"command": command, "config": resolved,
                "defaults": METHOD_DEFAULTS}
    manifest["hash"] = manifest_hash(
        {"command": command, "config": resolved, "defaults": METHOD_DEFAULTS})
    return manifest


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as err:
        click.echo(f"error: cannot read config file {path}: {err}", err=True)
        sys.exit(EXIT_INPUT)


def _resolve(flag_value, file_value, default):
    """Explicit flags win over the config file; the file wins over
    built-in defaults."""
    if flag_value is not None and flag_value != ():
        return flag_value
    if file_value is not None:
        return file_value
    return default


def _write_csv(path: Path, header: Sequence[str], rows, mhash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# manifest {mhash}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, payload: dict, mhash: str) -> None:
    payload = dict(payload)
    payload["manifest_hash"] = mhash
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(v: float) -> str:
    return f"{v:.10e}"


@click.group()
def main() -> None:
    """Streaming kernel density estimation under missing-at-random data."""


@main.command("reproduce-table")
@click.option("--table", "table_id", type=click.IntRange(1, 5), default=None,
              help="Which benchmark table to reproduce (1-5).")
@click.option("--n", "sizes", type=int, multiple=True,
              help="Sample sizes (repeatable).")
@click.option("--missing", "missing_rates", type=float, multiple=True,
              help="Missing-data proportions in [0, 1) (repeatable).")
@click.option("--rho", "rhos", type=float, multiple=True,
              help="Auxiliary-variable correlations for the MAR table.")
@click.option("--replications", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--grid", "grid_points", type=int, default=None)
@click.option("--threads", type=int, default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
@click.option("--gamma0", type=click.Choice(["1", "0.8"]), default=None,
              help="Restrict the recursive estimator to one stepsize.")
@click.option("--estimator", type=click.Choice(["recursive", "batch", "both"]),
              default=None)
@click.option("--config", "config_path", type=click.Path(exists=False),
              default=None, help="TOML file with the same keys as the flags.")
def cmd_reproduce_table(table_id, sizes, missing_rates, rhos, replications,
                        seed, grid_points, threads, out_dir, gamma0,
                        estimator, config_path):
    """Reproduce one Monte Carlo comparison table (MWISE or local MSE)."""
    cfgfile = _load_config_file(config_path)
    table_id = _resolve(table_id, cfgfile.get("table"), None)
    if table_id is None:
        click.echo("error: --table is required (1-5)", err=True)
        sys.exit(EXIT_USAGE)
    local = table_id == 5
    sizes = [int(v) for v in _resolve(
        tuple(sizes), cfgfile.get("n"), (100, 1000) if local else (100, 200, 500))]
    missing_rates = [float(v) for v in _resolve(
        tuple(missing_rates), cfgfile.get("missing"),
        (0.0,) if local else (0.0, 0.3, 0.5, 0.7))]
    rhos = [float(v) for v in _resolve(tuple(rhos), cfgfile.get("rho"),
                                       (0.3, 0.5, 0.8))]
    replications = int(_resolve(replications, cfgfile.get("replications"),
                                200 if local else 500))
    seed = int(_resolve(seed, cfgfile.get("seed"), 0))
    grid_points = int(_resolve(grid_points, cfgfile.get("grid"), 500))
    threads = int(_resolve(threads, cfgfile.get("threads"), 1))
    out_dir = Path(_resolve(out_dir, cfgfile.get("out_dir"), "results"))
    gamma0 = _resolve(gamma0, cfgfile.get("gamma0"), None)
    estimator = _resolve(estimator, cfgfile.get("estimator"), "both")

    if any(not (0.0 <= r < 1.0) for r in missing_rates) \
            or any(v < 2 for v in sizes) or replications < 1:
        click.echo("error: invalid override values", err=True)
        sys.exit(EXIT_USAGE)

    names = list(ESTIMATORS)
    if estimator == "recursive":
        names = [e for e in names if e != "nonrecursive"]
    elif estimator == "batch":
        names = ["nonrecursive"]
    if gamma0 is not None:
        keep = "recursive1" if gamma0 == "1" else "recursive2"
        names = [e for e in names if e == keep or e == "nonrecursive"]

    resolved = {"table": table_id, "n": sizes, "missing": missing_rates,
                "rho": rhos if table_id == 4 else [],
                "replications": replications, "seed": seed,
                "grid": grid_points, "estimators": names}
    manifest = build_manifest("reproduce-table", resolved)
    mhash = manifest["hash"]
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        if local:
            rows, timing_rows = _run_table5(sizes, replications, seed, names,
                                            threads)
            header = ["distribution", "x0", "n", "estimator",
                      "mean_bandwidth", "relative_root_mse", "fallbacks"]
        elif table_id == 4:
            rows, timing_rows = _run_table4(sizes, rhos, replications, seed,
                                            grid_points, names, threads)
            header = ["distribution", "rho", "n", "missing", "estimator",
                      "mwise", "mwise_se"]
        else:
            label, dist = TABLE_DISTRIBUTIONS[table_id]
            rows, timing_rows = _run_mwise_table(
                label, dist, sizes, missing_rates, replications, seed,
                grid_points, names, threads)
            header = ["distribution", "n", "missing", "estimator", "mwise",
                      "mwise_se"]
    except (DegenerateDataError, DegenerateWindowError) as err:
        click.echo(f"error: numeric degeneracy: {err}", err=True)
        sys.exit(EXIT_DEGENERATE)

    table_csv = out_dir / f"table{table_id}.csv"
    _write_csv(table_csv, header, rows, mhash)
    _write_csv(out_dir / f"table{table_id}_timing.csv",
               ["cell", "estimator", "cpu_seconds"], timing_rows, mhash)
    _write_json(out_dir / f"table{table_id}_manifest.json", manifest, mhash)
    click.echo(f"wrote {table_csv} ({len(rows)} rows), manifest {mhash[:12]}")


def _run_mwise_table(label, dist, sizes, missing_rates, replications, seed,
                     grid_points, names, threads):
    rows, timing = [], []
    for rate in missing_rates:
        miss = MissingnessSpec() if rate == 0.0 else MissingnessSpec("mcar", rate)
        for n in sizes:
            config = SimulationConfig(dist, miss, n=n,
                                      replications=replications,
                                      grid_points=grid_points, seed=seed)
            summaries = run_global_cell(config, names, threads=threads)
            for name in names:
                s = summaries[name]
                rows.append([label, n, rate, name, _fmt(s.mwise),
                             _fmt(s.mwise_se)])
                timing.append([f"{label}/n={n}/missing={rate}", name,
                               f"{s.total_cpu_seconds:.3f}"])
    return rows, timing


def _run_table4(sizes, rhos, replications, seed, grid_points, names, threads):
    rows, timing = [], []
    for rho in rhos:
        for label, dist in (TABLE_DISTRIBUTIONS[i] for i in (1, 2, 3)):
            miss = MissingnessSpec("mar", 0.7, rho)
            for n in sizes:
                config = SimulationConfig(dist, miss, n=n,
                                          replications=replications,
                                          grid_points=grid_points, seed=seed)
                summaries = run_global_cell(config, names, threads=threads)
                for name in names:
                    s = summaries[name]
                    rows.append([label, rho, n, 0.7, name, _fmt(s.mwise),
                                 _fmt(s.mwise_se)])
                    timing.append([f"{label}/rho={rho}/n={n}", name,
                                   f"{s.total_cpu_seconds:.3f}"])
    return rows, timing


def _run_table5(sizes, replications, seed, names, threads):
    rows, timing = [], []
    kinds = []
    if "nonrecursive" in names:
        kinds.append("NRPI")
    if any(e.startswith("recursive") for e in names):
        kinds.append("RPI")
    for label, dist, points in _table5_rows():
        for x0 in points:
            for n in sizes:
                config = SimulationConfig(dist, MissingnessSpec(), n=n,
                                          replications=replications, seed=seed)
                for kind in kinds:
                    res = run_local_cell(config, x0, kind, threads=threads)
                    rows.append([label, _fmt(x0), n, kind,
                                 _fmt(res.mean_bandwidth),
                                 _fmt(res.relative_root_mse),
                                 res.fallback_count])
                    timing.append([f"{label}/x0={x0:.4f}/n={n}", kind, ""])
    return rows, timing


def _read_csv_column(path, column, flag_column):
    """Returns (values, deltas); values are 0.0 where the entry is
    missing. Missing entries are empty fields, or rows whose flag column
    is 0 when a flag column is named."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as err:
        click.echo(f"error: cannot open {path}: {err}", err=True)
        sys.exit(EXIT_INPUT)
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            click.echo(f"error: column {column!r} not found in header",
                       err=True)
            sys.exit(EXIT_INPUT)
        if flag_column is not None and flag_column not in reader.fieldnames:
            click.echo(f"error: flag column {flag_column!r} not found",
                       err=True)
            sys.exit(EXIT_INPUT)
        values, deltas = [], []
        for lineno, row in enumerate(reader, start=2):
            raw = (row.get(column) or "").strip()
            if flag_column is not None:
                flag = (row.get(flag_column) or "").strip()
                if flag not in ("0", "1"):
                    click.echo(f"error: line {lineno}: flag must be 0 or 1",
                               err=True)
                    sys.exit(EXIT_INPUT)
                observed = flag == "1"
            else:
                observed = raw != ""
            if observed:
                try:
                    value = float(raw)
                except ValueError:
                    click.echo(
                        f"error: line {lineno}: cannot parse {raw!r}",
                        err=True)
                    sys.exit(EXIT_INPUT)
                values.append(value)
                deltas.append(1)
            else:
                values.append(0.0)
                deltas.append(0)
    return values, deltas


@main.command("estimate")
@click.argument("input_csv", type=click.Path())
@click.option("--column", required=True, help="Name of the data column.")
@click.option("--missing-flag-column", default=None,
              help="Optional 0/1 column marking observed rows; otherwise "
                   "empty fields are treated as missing.")
@click.option("--grid", "grid_points", type=int, default=500)
@click.option("--gamma0", type=click.Choice(["1", "0.8"]), default="1")
@click.option("--out-dir", type=click.Path(file_okay=False),
              default="results")
def cmd_estimate(input_csv, column, missing_flag_column, grid_points, gamma0,
                 out_dir):
    """Estimate a density from one CSV column with both estimators."""
    values, deltas = _read_csv_column(input_csv, column, missing_flag_column)
    n = len(values)
    observed = [v for v, d in zip(values, deltas) if d == 1]
    if len(observed) < 10:
        click.echo("error: need at least 10 observed values", err=True)
        sys.exit(EXIT_INPUT)

    data = [Observation(delta=d, x=(v if d else 0.0), t=(v if d else None))
            for v, d in zip(values, deltas)]
    complete = all(d == 1 for d in deltas)
    model = KnownPropensity(1.0) if complete else EmpiricalPropensity()

    resolved = {"input": str(input_csv), "column": column,
                "flag_column": missing_flag_column, "grid": grid_points,
                "gamma0": gamma0, "n": n, "observed": len(observed)}
    manifest = build_manifest("estimate", resolved)
    mhash = manifest["hash"]

    g0 = 1.0 if gamma0 == "1" else 0.8
    constants = GAUSSIAN.constants()
    try:
        scores = model.scores(data)
        pi_hat = float(np.mean(scores))
        scale = pilot_scale(observed)
        grid = EvaluationGrid.linspace(min(observed), max(observed),
                                       grid_points)
        rec_fun = bw.recursive_functionals(data, model, scores=scores)
        rec_choice = bw.select_global_bandwidth(rec_fun, constants, pi_hat,
                                                gamma0=g0, scale=scale)
        rec_values = evaluate_recursive(data, scores, StepsizeSchedule(g0),
                                        rec_choice.schedule(), grid.points)
        bat_fun = bw.batch_functionals(data, model, scores=scores)
        bat_choice = bw.select_global_bandwidth(bat_fun, constants, pi_hat,
                                                gamma0=None, scale=scale)
        bat = batch_ht_kde(data, bat_choice.value(n), model, grid)
    except (DegenerateDataError, DegenerateWindowError) as err:
        click.echo(f"error: numeric degeneracy: {err}", err=True)
        sys.exit(EXIT_DEGENERATE)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(input_csv).stem
    rows = [[_fmt(x), _fmt(rv), _fmt(bv)]
            for x, rv, bv in zip(grid.points, rec_values, bat.values)]
    _write_csv(out / f"{stem}_density.csv",
               ["x", "recursive", "nonrecursive"], rows, mhash)
    meta = {
        "n": n, "observed": len(observed), "pi_hat": pi_hat,
        "recursive": {"gamma0": g0, "bandwidth_at_n": rec_choice.value(n),
                      "coefficient": rec_choice.coefficient,
                      "i1": rec_fun.i1, "i2": rec_fun.i2,
                      "capped": rec_choice.capped},
        "nonrecursive": {"bandwidth": bat_choice.value(n),
                         "coefficient": bat_choice.coefficient,
                         "i1": bat_fun.i1, "i2": bat_fun.i2,
                         "capped": bat_choice.capped},
        "manifest": manifest,
    }
    _write_json(out / f"{stem}_meta.json", meta, mhash)
    click.echo(f"pi_hat={pi_hat:.4f} "
               f"h_rec={rec_choice.value(n):.4f} "
               f"h_batch={bat_choice.value(n):.4f}")


@main.command("bench")
@click.option("--n", type=int, default=500)
@click.option("--grid", "grid_points", type=int, default=500)
@click.option("--repetitions", type=int, default=20)
@click.option("--missing", "missing_rate", type=float, default=0.0)
@click.option("--seed", type=int, default=0)
@click.option("--out-dir", type=click.Path(file_okay=False),
              default="results")
def cmd_bench(n, grid_points, repetitions, missing_rate, seed, out_dir):
    """Time a tail resume of the recursive estimator against a full batch
    recomputation."""
    if n < 100:
        click.echo("error: --n must be at least 100", err=True)
        sys.exit(EXIT_USAGE)
    miss = MissingnessSpec() if missing_rate == 0.0 \
        else MissingnessSpec("mcar", missing_rate)
    config = SimulationConfig(Normal(), miss, n=n, replications=1,
                              grid_points=grid_points, seed=seed)
    try:
        report = run_timing_benchmark(config, repetitions=repetitions)
    except (DegenerateDataError, DegenerateWindowError) as err:
        click.echo(f"error: numeric degeneracy: {err}", err=True)
        sys.exit(EXIT_DEGENERATE)
    resolved = {"n": n, "grid": grid_points, "repetitions": repetitions,
                "missing": missing_rate, "seed": seed}
    manifest = build_manifest("bench", resolved)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "recursive_resume_seconds": report.recursive_resume_seconds,
        "batch_recompute_seconds": report.batch_recompute_seconds,
        "ratio": report.ratio,
        "resume_kernel_evals": report.resume_kernel_evals,
        "phases": report.phases,
        "manifest": manifest,
    }
    _write_json(out / "bench_timing.json", payload, manifest["hash"])
    click.echo(f"resume {report.recursive_resume_seconds * 1e3:.2f} ms, "
               f"batch {report.batch_recompute_seconds * 1e3:.2f} ms, "
               f"ratio {report.ratio:.2f}")
    for phase, seconds in report.phases.items():
        click.echo(f"  {phase}: {seconds * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
