"""Panel renderers for qmonitor CSV/JSON outputs.

Input schemas (produced by the ``qmonitor`` CLI):

* trajectories CSV: header
  ``trajectory_index,event_index,time,gamma,outcome_m,outcome_x``;
  one row per (trajectory, measurement event).
* sweep CSV: header ``L,gamma,delta,delta_se,delta_predicted,chi``.
* haar CSV: header ``L,mean_abs_delta,se``.
* optional results JSON next to a trajectories file may carry the analytic
  ``prediction`` block (var0/vart/cov of the rescaled outcomes).

Any header or shape mismatch raises :class:`SchemaError` before a single
byte of output is written; images are written atomically (temp + rename).
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TRAJECTORY_COLUMNS = ["trajectory_index", "event_index", "time", "gamma",
                      "outcome_m", "outcome_x"]
SWEEP_COLUMNS = ["L", "gamma", "delta", "delta_se", "delta_predicted", "chi"]
HAAR_COLUMNS = ["L", "mean_abs_delta", "se"]

PANELS = ("joint-marginals", "delta-gamma", "haar-decay")


class SchemaError(ValueError):
    """Input file does not match the documented qmonitor schema."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure: a panel type, its input files, and the output path."""

    panel: str
    inputs: dict[str, str]
    output: str
    labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.panel not in PANELS:
            raise SchemaError(f"unknown panel type {self.panel!r}; "
                              f"expected one of {PANELS}")
        for name, path in self.inputs.items():
            if not os.path.exists(path):
                raise SchemaError(f"input file for {name!r} does not exist: {path}")


def _read_csv(path: str, expected: list[str]) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise SchemaError(f"{path}: header mismatch, expected {expected}, "
                              f"got {header}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    try:
        return np.array(rows, dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric entry ({exc})") from exc


def _read_trajectories(path: str):
    data = _read_csv(path, TRAJECTORY_COLUMNS)
    traj = data[:, 0].astype(int)
    event = data[:, 1].astype(int)
    shots, n = traj.max() + 1, event.max() + 1
    if len(data) != shots * n:
        raise SchemaError(f"{path}: incomplete (shots x events) table")
    if n < 2:
        raise SchemaError(f"{path}: joint panel needs at least 2 events")
    outcomes = np.empty((shots, n))
    outcomes[traj, event] = data[:, 4]
    times = np.empty(n)
    gammas = np.empty(n)
    times[event] = data[:, 2]
    gammas[event] = data[:, 3]
    return outcomes, times, gammas


def _read_prediction(path: str) -> dict | None:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed JSON ({exc})") from exc
    pred = payload.get("prediction")
    if pred is not None and not {"var0", "vart"} <= set(pred):
        raise SchemaError(f"{path}: prediction block must contain var0 and vart")
    return pred


def _save(fig, output: str) -> str:
    directory = os.path.dirname(os.path.abspath(output)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".png.tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="png", dpi=150)
        os.replace(tmp, output)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)
    return output


def _panel_joint_marginals(spec: FigureSpec):
    outcomes, times, gammas = _read_trajectories(spec.inputs["trajectories"])
    pred = None
    if "results" in spec.inputs:
        pred = _read_prediction(spec.inputs["results"])
    m0, m1 = outcomes[:, 0], outcomes[:, 1]
    lo = min(m0.min(), m1.min())
    hi = max(m0.max(), m1.max())
    edges = np.linspace(lo, hi, 61)

    fig = plt.figure(figsize=(5.2, 5.2))
    grid = fig.add_gridspec(2, 2, width_ratios=(4, 1.2), height_ratios=(1.2, 4),
                            hspace=0.05, wspace=0.05)
    ax = fig.add_subplot(grid[1, 0])
    ax_top = fig.add_subplot(grid[0, 0], sharex=ax)
    ax_right = fig.add_subplot(grid[1, 1], sharey=ax)

    ax.hist2d(m0, m1, bins=(edges, edges), cmap="Blues")
    ax.set_xlabel(spec.labels.get("x", f"$m_{{t={times[0]:g}}}$"))
    ax.set_ylabel(spec.labels.get("y", f"$m_{{t={times[1]:g}}}$"))

    # first-event marginal unfilled, second filled
    ax_top.hist(m0, bins=edges, histtype="step", color="C0", density=True)
    ax_right.hist(m1, bins=edges, histtype="stepfilled", color="C1", alpha=0.6,
                  density=True, orientation="horizontal")
    if pred is not None:
        mm = np.linspace(lo, hi, 400)
        for axis, key, gamma, orient in ((ax_top, "var0", gammas[0], "v"),
                                         (ax_right, "vart", gammas[1], "h")):
            var_m = float(pred[key]) / gamma**2  # x = gamma m
            dens = np.exp(-(mm**2) / (2 * var_m)) / np.sqrt(2 * np.pi * var_m)
            if orient == "v":
                axis.plot(mm, dens, "k--", lw=1)
            else:
                axis.plot(dens, mm, "k--", lw=1)
    ax_top.tick_params(labelbottom=False)
    ax_right.tick_params(labelleft=False)
    ax_top.set_yticks([])
    ax_right.set_xticks([])
    return fig


def _panel_delta_gamma(spec: FigureSpec):
    data = _read_csv(spec.inputs["sweep"], SWEEP_COLUMNS)
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    gam_all = np.sort(np.unique(data[:, 1]))
    for k, L in enumerate(np.unique(data[:, 0]).astype(int)):
        sel = data[data[:, 0] == L]
        order = np.argsort(sel[:, 1])
        sel = sel[order]
        ax.errorbar(sel[:, 1], sel[:, 2], yerr=sel[:, 3], fmt="o", ms=4,
                    color=f"C{k}", label=f"$L={L}$")
        # quartic guide anchored on the analytic prediction of this L
        guide = sel[0, 4] / sel[0, 1] ** 4 * gam_all**4
        ax.plot(gam_all, guide, "--", color=f"C{k}", lw=1, alpha=0.7)
    positive = data[:, 2] > 0
    if not np.any(positive):
        raise SchemaError(f"{spec.inputs['sweep']}: no positive delta values "
                          "to place on a log scale")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(spec.labels.get("x", r"$\gamma$"))
    ax.set_ylabel(spec.labels.get("y", r"$\delta$"))
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig


def _panel_haar_decay(spec: FigureSpec):
    data = _read_csv(spec.inputs["haar"], HAAR_COLUMNS)
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    order = np.argsort(data[:, 0])
    data = data[order]
    ax.errorbar(data[:, 0], data[:, 1], yerr=data[:, 2], fmt="o-", ms=5,
                color="C0")
    ax.set_xlabel(spec.labels.get("x", "$L$"))
    ax.set_ylabel(spec.labels.get("y", r"$\overline{|\delta|}$"))
    ax.set_xticks(data[:, 0].astype(int))
    fig.tight_layout()
    return fig


_RENDERERS = {
    "joint-marginals": _panel_joint_marginals,
    "delta-gamma": _panel_delta_gamma,
    "haar-decay": _panel_haar_decay,
}

_REQUIRED_INPUTS = {
    "joint-marginals": {"trajectories"},
    "delta-gamma": {"sweep"},
    "haar-decay": {"haar"},
}


def render(spec: FigureSpec) -> str:
    """Render one panel to ``spec.output``; returns the output path.

    Raises :class:`SchemaError` on any input mismatch, in which case no
    output file is created (existing files are left untouched).
    """
    missing = _REQUIRED_INPUTS[spec.panel] - set(spec.inputs)
    if missing:
        raise SchemaError(f"panel {spec.panel!r} requires inputs {sorted(missing)}")
    fig = _RENDERERS[spec.panel](spec)
    return _save(fig, spec.output)
