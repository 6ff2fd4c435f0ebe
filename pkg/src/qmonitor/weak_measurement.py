"""Gaussian-ancilla weak measurement channel and trajectory sampling.

The ancilla is never represented explicitly: the outcome distribution is a
mixture of Gaussians over the computational basis, so sampling draws a basis
label z with probability |psi_z|^2 and then m ~ Normal(q_z, 1/(2 gamma^2)).
The post-measurement state is the normalized Kraus update
(K_m psi)_z = psi_z exp(-gamma^2 (m - q_z)^2 / 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlations import InvalidInputError
from .spin_chain import (
    DiagonalObservable,
    NumericError,
    Propagator,
    SparseHamiltonian,
)


@dataclass(frozen=True)
class MeasurementSchedule:
    """Ordered measurement events: times (strictly ascending) and strengths."""

    times: np.ndarray
    gammas: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        gammas = np.atleast_1d(np.asarray(self.gammas, dtype=float))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "gammas", gammas)
        if np.any(np.diff(times) <= 0):
            raise InvalidInputError("schedule times must be strictly ascending")
        if gammas.shape != times.shape or np.any(gammas <= 0):
            raise InvalidInputError("schedule needs one positive strength per time")

    @property
    def n(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Outcomes m_{t_1..t_n} of one monitored run, with its RNG seed."""

    seed: int
    outcomes: np.ndarray
    schedule: MeasurementSchedule

    def __post_init__(self):
        if len(self.outcomes) != self.schedule.n or not np.all(np.isfinite(self.outcomes)):
            raise InvalidInputError("outcomes must be finite, one per scheduled event")


def outcome_density(
    psi: np.ndarray, values: np.ndarray, gamma: float, m: np.ndarray | float
) -> np.ndarray | float:
    """Outcome probability density p(m) = sum_z |psi_z|^2 N(m; q_z, 1/(2 gamma^2)).

    ``values`` are the (centered) eigenvalues q_z of the monitored observable.
    """
    weights = np.abs(np.asarray(psi)) ** 2
    m_arr = np.atleast_1d(np.asarray(m, dtype=float))
    dens = np.empty_like(m_arr)
    # chunk over m to keep the (m, z) kernel matrix small
    for i0 in range(0, len(m_arr), 512):
        block = m_arr[i0 : i0 + 512, None] - values[None, :]
        dens[i0 : i0 + 512] = (gamma / np.sqrt(np.pi)) * np.exp(
            -(gamma**2) * block**2
        ) @ weights
    return dens if np.ndim(m) else float(dens[0])


def _sample_event(psi, values, gamma, rng):
    """One weak measurement on one state; two RNG draws (uniform, normal)."""
    weights = np.abs(psi) ** 2
    cum = np.cumsum(weights)
    z = int(np.searchsorted(cum, rng.random() * cum[-1]))
    m = values[z] + rng.standard_normal() / (gamma * np.sqrt(2.0))
    log_kraus = -(gamma**2) * (m - values) ** 2 / 2
    post = psi * np.exp(log_kraus - log_kraus.max())
    norm = np.linalg.norm(post)
    if norm == 0.0 or not np.isfinite(norm):
        raise NumericError("post-measurement state underflowed during renormalization")
    return m, post / norm


def measure_weak(
    psi: np.ndarray,
    obs: DiagonalObservable,
    gamma: float,
    rng: np.random.Generator,
    offset: float | None = None,
) -> tuple[float, np.ndarray]:
    """Sample one weak measurement of q and return (m, post-measurement state)."""
    if gamma <= 0:
        raise InvalidInputError("measurement strength must be positive")
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise InvalidInputError("state must be normalized")
    m, post = _sample_event(psi, obs.centered(offset), gamma, rng)
    return float(m), post


def reference_offsets(
    psi0: np.ndarray,
    h: SparseHamiltonian,
    obs: DiagonalObservable,
    times: np.ndarray,
    prop: Propagator | None = None,
) -> np.ndarray:
    """Mean mu(t_k) of q along the unperturbed evolution of psi0.

    The fluctuating part of q is defined relative to the measurement-free
    reference state, so the offsets never see the measurement backreaction.
    """
    prop = prop or Propagator(h)
    psi = np.asarray(psi0, dtype=complex)
    out = np.empty(len(times))
    prev = 0.0
    for k, t in enumerate(times):
        psi = prop.apply(psi, t - prev)
        prev = t
        out[k] = obs.expectation(psi)
    return out


def run_trajectory(
    psi0: np.ndarray,
    h: SparseHamiltonian,
    obs: DiagonalObservable,
    schedule: MeasurementSchedule,
    seed: int,
    prop: Propagator | None = None,
    offsets: np.ndarray | None = None,
) -> TrajectoryRecord:
    """Run one monitored trajectory: alternate propagation and weak measurement."""
    prop = prop or Propagator(h)
    if offsets is None:
        offsets = reference_offsets(psi0, h, obs, schedule.times, prop)
    rng = np.random.default_rng(seed)
    psi = np.asarray(psi0, dtype=complex)
    outcomes = np.empty(schedule.n)
    prev = 0.0
    for k, (t, gamma) in enumerate(zip(schedule.times, schedule.gammas)):
        if t != prev:
            psi = prop.apply(psi, t - prev)
            prev = t
        m, psi = _sample_event(psi, obs.centered(offsets[k]), gamma, rng)
        outcomes[k] = m
    return TrajectoryRecord(seed=seed, outcomes=outcomes, schedule=schedule)


def _run_batch(psi0, prop, obs, schedule, offsets, seeds):
    """Vectorized trajectory batch: one state column per trajectory.

    Each trajectory owns an RNG stream seeded by its SeedSequence, with the
    same draw order as ``run_trajectory``, so batched and serial runs agree
    bit-for-bit.
    """
    n_traj = len(seeds)
    states = np.tile(np.asarray(psi0, dtype=complex)[:, None], (1, n_traj))
    rngs = [np.random.default_rng(s) for s in seeds]
    outcomes = np.empty((n_traj, schedule.n))
    prev = 0.0
    for k, (t, gamma) in enumerate(zip(schedule.times, schedule.gammas)):
        if t != prev:
            states = prop.apply(states, t - prev)
            prev = t
        values = obs.centered(offsets[k])
        weights = np.abs(states) ** 2
        cum = np.cumsum(weights, axis=0)
        for j in range(n_traj):
            u = rngs[j].random() * cum[-1, j]
            z = int(np.searchsorted(cum[:, j], u))
            outcomes[j, k] = values[z] + rngs[j].standard_normal() / (gamma * np.sqrt(2.0))
        log_kraus = -(gamma**2) * (outcomes[None, :, k] - values[:, None]) ** 2 / 2
        states = states * np.exp(log_kraus - log_kraus.max(axis=0, keepdims=True))
        norms = np.linalg.norm(states, axis=0)
        if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
            raise NumericError("post-measurement state underflowed during renormalization")
        states = states / norms[None, :]
    return outcomes


def run_trajectories(
    psi0: np.ndarray,
    h: SparseHamiltonian,
    obs: DiagonalObservable,
    schedule: MeasurementSchedule,
    shots: int,
    master_seed: int,
    batch_size: int | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Sample ``shots`` independent trajectories; returns (shots, n) outcomes m.

    RNG streams are derived from SeedSequence(master_seed).spawn, one per
    trajectory, so results are independent of batch size and worker count.
    """
    prop = Propagator(h)
    offsets = reference_offsets(psi0, h, obs, schedule.times, prop)
    seeds = np.random.SeedSequence(master_seed).spawn(shots)
    if batch_size is None:
        batch_size = max(1, min(shots, (1 << 22) // h.dim))
    batches = [(i, seeds[i : i + batch_size]) for i in range(0, shots, batch_size)]
    out = np.empty((shots, schedule.n))
    if workers > 1 and len(batches) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_run_batch, psi0, prop, obs, schedule, offsets, bs): i0
                for i0, bs in batches
            }
            for fut, i0 in futures.items():
                res = fut.result()
                out[i0 : i0 + len(res)] = res
    else:
        for i0, bs in batches:
            out[i0 : i0 + len(bs)] = _run_batch(psi0, prop, obs, schedule, offsets, bs)
    return out
