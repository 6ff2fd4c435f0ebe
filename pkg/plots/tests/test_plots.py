"""Figure-script tests: render each panel from schema-conforming inputs,
fail cleanly (no partial output) on schema mismatches."""

import csv
import json
import os

import numpy as np
import pytest

from qmonitor_plots import FigureSpec, SchemaError, render
from qmonitor_plots.cli import main

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _write_trajectories(path, outcomes, times, gammas):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trajectory_index", "event_index", "time", "gamma",
                    "outcome_m", "outcome_x"])
        for i, row in enumerate(outcomes):
            for k, m in enumerate(row):
                w.writerow([i, k, f"{times[k]:.17g}", f"{gammas[k]:.17g}",
                            f"{m:.17g}", f"{gammas[k] * m:.17g}"])


def _write_table(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)


@pytest.fixture
def trajectories_csv(tmp_path):
    rng = np.random.default_rng(3)
    outcomes = rng.normal(size=(500, 2))
    path = tmp_path / "trajectories.csv"
    _write_trajectories(path, outcomes, [0.0, 1.0], [1.0, 1.0])
    return str(path)


@pytest.fixture
def sweep_csv(tmp_path):
    rows = []
    for L in (8, 12):
        for g in (0.4, 0.6, 0.8, 1.0):
            pred = g**4 * 0.3
            rows.append([L, g, pred * 1.05, pred * 0.1, pred, 0.77])
    path = tmp_path / "sweep.csv"
    _write_table(path, ["L", "gamma", "delta", "delta_se", "delta_predicted",
                        "chi"], rows)
    return str(path)


@pytest.fixture
def haar_csv(tmp_path):
    path = tmp_path / "haar.csv"
    _write_table(path, ["L", "mean_abs_delta", "se"],
                 [[8, 0.06, 0.004], [10, 0.05, 0.003], [12, 0.04, 0.003]])
    return str(path)


def _assert_png(path):
    assert os.path.exists(path)
    with open(path, "rb") as fh:
        assert fh.read(8) == PNG_MAGIC


def test_joint_marginals_renders(trajectories_csv, tmp_path):
    out = str(tmp_path / "fig1.png")
    spec = FigureSpec(panel="joint-marginals",
                      inputs={"trajectories": trajectories_csv}, output=out)
    assert render(spec) == out
    _assert_png(out)


def test_joint_marginals_with_prediction_overlay(trajectories_csv, tmp_path):
    results = tmp_path / "results.json"
    results.write_text(json.dumps(
        {"prediction": {"var0": 0.9, "vart": 1.1, "cov": 0.2}}))
    out = str(tmp_path / "fig1b.png")
    render(FigureSpec(panel="joint-marginals",
                      inputs={"trajectories": trajectories_csv,
                              "results": str(results)}, output=out))
    _assert_png(out)


def test_delta_gamma_renders(sweep_csv, tmp_path):
    out = str(tmp_path / "fig2.png")
    render(FigureSpec(panel="delta-gamma", inputs={"sweep": sweep_csv},
                      output=out))
    _assert_png(out)


def test_haar_decay_renders(haar_csv, tmp_path):
    out = str(tmp_path / "fig3.png")
    render(FigureSpec(panel="haar-decay", inputs={"haar": haar_csv},
                      output=out))
    _assert_png(out)


def test_rerun_is_byte_identical(sweep_csv, tmp_path):
    out = str(tmp_path / "fig.png")
    render(FigureSpec(panel="delta-gamma", inputs={"sweep": sweep_csv},
                      output=out))
    first = open(out, "rb").read()
    render(FigureSpec(panel="delta-gamma", inputs={"sweep": sweep_csv},
                      output=out))
    assert open(out, "rb").read() == first


def test_unknown_panel_rejected(sweep_csv, tmp_path):
    with pytest.raises(SchemaError):
        FigureSpec(panel="scatter", inputs={"sweep": sweep_csv},
                   output=str(tmp_path / "x.png"))


def test_missing_input_file_rejected(tmp_path):
    with pytest.raises(SchemaError):
        FigureSpec(panel="haar-decay",
                   inputs={"haar": str(tmp_path / "absent.csv")},
                   output=str(tmp_path / "x.png"))


def test_missing_required_input_key(tmp_path, sweep_csv):
    spec = FigureSpec(panel="haar-decay", inputs={"sweep": sweep_csv},
                      output=str(tmp_path / "x.png"))
    with pytest.raises(SchemaError):
        render(spec)


def test_header_mismatch_no_partial_file(tmp_path):
    bad = tmp_path / "haar.csv"
    _write_table(bad, ["L", "delta", "se"], [[8, 0.1, 0.01]])
    out = tmp_path / "fig.png"
    with pytest.raises(SchemaError):
        render(FigureSpec(panel="haar-decay", inputs={"haar": str(bad)},
                          output=str(out)))
    assert not out.exists()
    assert not list(tmp_path.glob("*.tmp"))


def test_empty_input_rejected(tmp_path):
    empty = tmp_path / "haar.csv"
    _write_table(empty, ["L", "mean_abs_delta", "se"], [])
    with pytest.raises(SchemaError, match="no data rows"):
        render(FigureSpec(panel="haar-decay", inputs={"haar": str(empty)},
                          output=str(tmp_path / "fig.png")))


def test_non_numeric_entry_rejected(tmp_path):
    bad = tmp_path / "haar.csv"
    _write_table(bad, ["L", "mean_abs_delta", "se"], [[8, "nanx", 0.01]])
    with pytest.raises(SchemaError, match="non-numeric"):
        render(FigureSpec(panel="haar-decay", inputs={"haar": str(bad)},
                          output=str(tmp_path / "fig.png")))


def test_single_event_trajectories_rejected(tmp_path):
    path = tmp_path / "trajectories.csv"
    _write_trajectories(path, np.zeros((10, 1)), [0.0], [1.0])
    with pytest.raises(SchemaError, match="2 events"):
        render(FigureSpec(panel="joint-marginals",
                          inputs={"trajectories": str(path)},
                          output=str(tmp_path / "fig.png")))


def test_malformed_results_json_rejected(trajectories_csv, tmp_path):
    results = tmp_path / "results.json"
    results.write_text("{not json")
    with pytest.raises(SchemaError):
        render(FigureSpec(panel="joint-marginals",
                          inputs={"trajectories": trajectories_csv,
                                  "results": str(results)},
                          output=str(tmp_path / "fig.png")))


def test_existing_output_untouched_on_failure(tmp_path):
    out = tmp_path / "fig.png"
    out.write_bytes(b"sentinel")
    bad = tmp_path / "haar.csv"
    _write_table(bad, ["wrong"], [[1]])
    with pytest.raises(SchemaError):
        render(FigureSpec(panel="haar-decay", inputs={"haar": str(bad)},
                          output=str(out)))
    assert out.read_bytes() == b"sentinel"


def test_cli_renders_and_exit_codes(haar_csv, tmp_path, capsys):
    out = str(tmp_path / "cli.png")
    assert main(["haar-decay", "--haar", haar_csv, "--output", out]) == 0
    _assert_png(out)
    assert capsys.readouterr().out.strip() == out

    assert main([]) == 1  # no panel
    assert main(["haar-decay", "--output", out]) == 1  # missing required flag
    missing = str(tmp_path / "absent.csv")
    assert main(["haar-decay", "--haar", missing, "--output", out]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_custom_labels(sweep_csv, tmp_path):
    out = str(tmp_path / "labels.png")
    assert main(["delta-gamma", "--sweep", sweep_csv, "--output", out,
                 "--xlabel", "strength", "--ylabel", "gap"]) == 0
    _assert_png(out)


def test_end_to_end_from_qmonitor_run(tmp_path):
    """Full pipeline: a tiny qmonitor monitor run feeds the joint panel."""
    qm = pytest.importorskip("qmonitor.cli")
    rundir = tmp_path / "run"
    rc = qm.main(["monitor", "--L", "3", "--shots", "60", "--seed", "5",
                  "--output-dir", str(rundir)])
    assert rc == 0
    out = str(tmp_path / "fig.png")
    assert main(["joint-marginals",
                 "--trajectories", str(rundir / "trajectories.csv"),
                 "--results", str(rundir / "results.json"),
                 "--output", out]) == 0
    _assert_png(out)
