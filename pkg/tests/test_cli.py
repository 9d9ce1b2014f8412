"""Command-line interface: manifest embedding, determinism, input
validation exit codes, and config-file precedence."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from streamkde.cli import (
    EXIT_DEGENERATE,
    EXIT_INPUT,
    EXIT_USAGE,
    build_manifest,
    main,
    manifest_hash,
)

RUNNER = CliRunner()

FAST_TABLE = ["reproduce-table", "--table", "1", "--n", "60",
              "--missing", "0.3", "--replications", "4", "--grid", "60"]


def run(args, **kwargs):
    return RUNNER.invoke(main, args, catch_exceptions=False, **kwargs)


def write_demo_csv(path, missing=True):
    lines = ["id,value,flag"]
    vals = [0.31, -0.52, 1.12, 0.04, -1.4, 0.77, 0.21, -0.9, 1.6, -0.3,
            0.5, 0.9, -1.1, 0.2]
    for i, v in enumerate(vals):
        if missing and i % 5 == 4:
            lines.append(f"{i},,0")
        else:
            lines.append(f"{i},{v},1")
    Path(path).write_text("\n".join(lines) + "\n")


def test_manifest_hash_is_canonical():
    a = manifest_hash({"b": 1, "a": [2, 3]})
    b = manifest_hash({"a": [2, 3], "b": 1})
    assert a == b and len(a) == 64
    assert manifest_hash({"a": [3, 2], "b": 1}) != a


def test_build_manifest_embeds_hash():
    m = build_manifest("bench", {"n": 100})
    assert m["hash"] == manifest_hash(
        {"command": "bench", "config": {"n": 100}, "defaults": m["defaults"]})


def test_reproduce_table_writes_tagged_outputs(tmp_path):
    result = run(FAST_TABLE + ["--out-dir", str(tmp_path)])
    assert result.exit_code == 0
    table = (tmp_path / "table1.csv").read_text()
    first = table.splitlines()[0]
    assert first.startswith("# manifest ")
    mhash = first.split()[-1]
    manifest = json.loads((tmp_path / "table1_manifest.json").read_text())
    assert manifest["manifest_hash"] == mhash == manifest["hash"]
    timing = (tmp_path / "table1_timing.csv").read_text()
    assert timing.splitlines()[0] == first
    # one row per estimator in the single requested cell
    assert len(table.splitlines()) == 2 + 3


def test_reproduce_table_threads_do_not_change_bytes(tmp_path):
    outputs = {}
    for threads in (1, 3):
        out = tmp_path / f"t{threads}"
        result = run(FAST_TABLE + ["--threads", str(threads),
                                   "--out-dir", str(out)])
        assert result.exit_code == 0
        outputs[threads] = (out / "table1.csv").read_bytes()
    assert outputs[1] == outputs[3]


def test_reproduce_table_requires_table():
    result = RUNNER.invoke(main, ["reproduce-table"])
    assert result.exit_code == EXIT_USAGE


def test_reproduce_table_rejects_bad_missing_rate():
    result = RUNNER.invoke(main, FAST_TABLE[:4] + ["--missing", "1.0",
                                                   "--replications", "2"])
    assert result.exit_code == EXIT_USAGE


def test_config_file_supplies_values_and_flags_win(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        'table = 1\nn = [60]\nmissing = [0.3]\nreplications = 4\n'
        'grid = 60\nout_dir = "%s"\n' % (tmp_path / "from_file"))
    result = run(["reproduce-table", "--config", str(cfg)])
    assert result.exit_code == 0
    assert (tmp_path / "from_file" / "table1.csv").exists()

    # an explicit flag overrides the file's replications and out_dir
    result = run(["reproduce-table", "--config", str(cfg),
                  "--replications", "2", "--out-dir",
                  str(tmp_path / "flagged")])
    assert result.exit_code == 0
    manifest = json.loads(
        (tmp_path / "flagged" / "table1_manifest.json").read_text())
    assert manifest["config"]["replications"] == 2


def test_config_file_missing_is_input_error(tmp_path):
    result = RUNNER.invoke(main, ["reproduce-table", "--config",
                                  str(tmp_path / "nope.toml")])
    assert result.exit_code == EXIT_INPUT


def test_estimate_outputs(tmp_path):
    csv_path = tmp_path / "demo.csv"
    write_demo_csv(csv_path)
    result = run(["estimate", str(csv_path), "--column", "value",
                  "--missing-flag-column", "flag", "--grid", "50",
                  "--out-dir", str(tmp_path)])
    assert result.exit_code == 0
    assert "pi_hat=" in result.output
    density = (tmp_path / "demo_density.csv").read_text().splitlines()
    assert density[0].startswith("# manifest ")
    assert density[1] == "x,recursive,nonrecursive"
    assert len(density) == 2 + 50
    meta = json.loads((tmp_path / "demo_meta.json").read_text())
    assert meta["n"] == 14
    assert meta["observed"] == 12
    assert meta["pi_hat"] == pytest.approx(12.0 / 14.0)
    assert meta["recursive"]["bandwidth_at_n"] > 0
    assert meta["manifest_hash"] == meta["manifest"]["hash"]


def test_estimate_empty_fields_mark_missing(tmp_path):
    csv_path = tmp_path / "demo.csv"
    write_demo_csv(csv_path)
    result = run(["estimate", str(csv_path), "--column", "value",
                  "--grid", "50", "--out-dir", str(tmp_path)])
    assert result.exit_code == 0
    meta = json.loads((tmp_path / "demo_meta.json").read_text())
    assert meta["observed"] == 12


def test_estimate_missing_file_exit_code(tmp_path):
    result = RUNNER.invoke(main, ["estimate", str(tmp_path / "absent.csv"),
                                  "--column", "value"])
    assert result.exit_code == EXIT_INPUT


def test_estimate_unknown_column_exit_code(tmp_path):
    csv_path = tmp_path / "demo.csv"
    write_demo_csv(csv_path)
    result = RUNNER.invoke(main, ["estimate", str(csv_path),
                                  "--column", "wrong"])
    assert result.exit_code == EXIT_INPUT


def test_estimate_unparseable_value_exit_code(tmp_path):
    csv_path = tmp_path / "bad.csv"
    csv_path.write_text("value\n" + "\n".join(["1.0"] * 10 + ["oops"]) + "\n")
    result = RUNNER.invoke(main, ["estimate", str(csv_path),
                                  "--column", "value"])
    assert result.exit_code == EXIT_INPUT


def test_estimate_too_few_observed_exit_code(tmp_path):
    csv_path = tmp_path / "tiny.csv"
    csv_path.write_text("value\n1.0\n2.0\n3.0\n")
    result = RUNNER.invoke(main, ["estimate", str(csv_path),
                                  "--column", "value"])
    assert result.exit_code == EXIT_INPUT


def test_estimate_degenerate_data_exit_code(tmp_path):
    csv_path = tmp_path / "const.csv"
    csv_path.write_text("value\n" + "\n".join(["5.0"] * 12) + "\n")
    result = RUNNER.invoke(main, ["estimate", str(csv_path),
                                  "--column", "value"])
    assert result.exit_code == EXIT_DEGENERATE


def test_bench_writes_timing_json(tmp_path):
    result = run(["bench", "--n", "150", "--grid", "60",
                  "--repetitions", "2", "--out-dir", str(tmp_path)])
    assert result.exit_code == 0
    assert "ratio" in result.output
    payload = json.loads((tmp_path / "bench_timing.json").read_text())
    assert payload["resume_kernel_evals"] > 0
    assert payload["ratio"] > 0
    # timing lives in its own file; the deterministic table files never
    # carry wall-clock numbers
    assert "recursive_resume_seconds" in payload


def test_bench_rejects_small_n():
    result = RUNNER.invoke(main, ["bench", "--n", "50"])
    assert result.exit_code == EXIT_USAGE
