"""File formats: trajectory/summary CSV tables, JSON inputs, run manifests.

All floating-point output uses 17 significant digits so that reruns with the
same (config, seed) produce byte-identical files.  Manifests are written
atomically (temp file + rename) only after the run has succeeded.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from typing import Any, Iterable

import numpy as np

from .correlations import CorrelationData, InvalidInputError, SpectralFunctions

TRAJECTORY_COLUMNS = ["trajectory_index", "event_index", "time", "gamma",
                      "outcome_m", "outcome_x"]


def fmt(value: float) -> str:
    """Decimal form with 17 significant digits (round-trips binary64)."""
    return f"{float(value):.17g}"


def write_trajectories_csv(path: str, outcomes: np.ndarray, times: np.ndarray,
                           gammas: np.ndarray) -> None:
    """Long-format dump: one row per (trajectory, measurement event)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for i, row in enumerate(outcomes):
            for k, m in enumerate(row):
                writer.writerow([i, k, fmt(times[k]), fmt(gammas[k]),
                                 fmt(m), fmt(gammas[k] * m)])


def read_trajectories_csv(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_trajectories_csv`.

    Returns (outcomes of shape (shots, n), times, gammas).  Raises
    InvalidInputError on any schema mismatch.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAJECTORY_COLUMNS:
            raise InvalidInputError(
                f"trajectory CSV header mismatch: expected {TRAJECTORY_COLUMNS}, "
                f"got {header}")
        rows = list(reader)
    if not rows:
        raise InvalidInputError("trajectory CSV has no data rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"non-numeric entry in trajectory CSV: {exc}") from exc
    if data.shape[1] != len(TRAJECTORY_COLUMNS):
        raise InvalidInputError("trajectory CSV has a malformed row")
    traj = data[:, 0].astype(int)
    event = data[:, 1].astype(int)
    n = event.max() + 1
    shots = traj.max() + 1
    if len(data) != shots * n:
        raise InvalidInputError("trajectory CSV is not a complete (shots x events) table")
    outcomes = np.empty((shots, n))
    outcomes[traj, event] = data[:, 4]
    times = np.empty(n)
    gammas = np.empty(n)
    times[event] = data[:, 2]
    gammas[event] = data[:, 3]
    return outcomes, times, gammas


def write_table_csv(path: str, columns: list[str], rows: Iterable[Iterable[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def read_table_csv(path: str, expected_columns: list[str]) -> np.ndarray:
    """Numeric table with a mandatory header; schema mismatches are fatal."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected_columns:
            raise InvalidInputError(
                f"CSV header mismatch: expected {expected_columns}, got {header}")
        rows = list(reader)
    if not rows:
        raise InvalidInputError("CSV has no data rows")
    try:
        return np.array(rows, dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"non-numeric entry in CSV: {exc}") from exc


def _jsonify(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonify(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_json_atomic(path: str, payload: dict) -> None:
    """Write via a sibling temp file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(_jsonify(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"malformed JSON in {path}: {exc}") from exc


def correlation_data_to_dict(corr: CorrelationData) -> dict:
    return {"times": corr.times, "gammas": corr.gammas,
            "keldysh": corr.keldysh, "response": corr.response}


def correlation_data_from_dict(payload: dict) -> CorrelationData:
    for key in ("times", "gammas", "keldysh", "response"):
        if key not in payload:
            raise InvalidInputError(f"correlation file missing field '{key}'")
    return CorrelationData(times=np.asarray(payload["times"], dtype=float),
                           gammas=np.asarray(payload["gammas"], dtype=float),
                           keldysh=np.asarray(payload["keldysh"], dtype=float),
                           response=np.asarray(payload["response"], dtype=float))


def spectral_functions_from_dict(payload: dict) -> SpectralFunctions:
    for key in ("omegas", "c_omega", "chi_omega"):
        if key not in payload:
            raise InvalidInputError(f"spectrum file missing field '{key}'")
    chi = payload["chi_omega"]
    if isinstance(chi, dict):
        chi = np.asarray(chi["re"], dtype=float) + 1j * np.asarray(chi["im"], dtype=float)
    else:
        chi = np.asarray(chi, dtype=complex)
    return SpectralFunctions(omegas=np.asarray(payload["omegas"], dtype=float),
                             c_omega=np.asarray(payload["c_omega"], dtype=float),
                             chi_omega=chi,
                             beta=float(payload.get("beta", 0.0)))
