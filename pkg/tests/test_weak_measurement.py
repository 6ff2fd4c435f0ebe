"""Tests of the weak-measurement channel and trajectory sampling."""

import numpy as np
import pytest
from scipy import stats
from scipy.special import roots_hermite

from qmonitor.correlations import InvalidInputError
from qmonitor.spin_chain import (
    build_hamiltonian,
    ground_state,
    haar_random_state,
    magnetization_observable,
)
from qmonitor.weak_measurement import (
    MeasurementSchedule,
    measure_weak,
    outcome_density,
    run_trajectories,
    run_trajectory,
)


def test_schedule_validation():
    MeasurementSchedule(times=[0.0, 1.0], gammas=[1.0, 2.0])
    with pytest.raises(InvalidInputError):
        MeasurementSchedule(times=[0.0, 0.0], gammas=[1.0, 1.0])
    with pytest.raises(InvalidInputError):
        MeasurementSchedule(times=[0.0, 1.0], gammas=[1.0, -1.0])
    with pytest.raises(InvalidInputError):
        MeasurementSchedule(times=[0.0, 1.0], gammas=[1.0])


def test_outcome_density_eigenstate_is_normal():
    psi = np.zeros(4, dtype=complex)
    psi[0] = 1.0  # q eigenvalue of |00> at L=2, alpha=1/2 is 2/sqrt(2)
    values = magnetization_observable(2, 0.5).values
    gamma = 1.3
    m = np.linspace(-4, 6, 101)
    dens = outcome_density(psi, values, gamma, m)
    ref = stats.norm.pdf(m, loc=values[0], scale=1 / (gamma * np.sqrt(2)))
    assert np.allclose(dens, ref, atol=1e-12)


def test_outcome_density_bimodal_superposition():
    values = np.array([1.0, -1.0])
    psi = np.array([1.0, 1.0]) / np.sqrt(2)
    gamma = 5.0
    m = np.linspace(-2, 2, 401)
    dens = outcome_density(psi, values, gamma, m)
    assert np.allclose(dens, dens[::-1], atol=1e-12)  # symmetric
    mid = dens[len(m) // 2]
    assert mid < 0.01 * dens.max()  # two well-separated peaks


def test_outcome_density_normalized():
    h = build_hamiltonian(4, 2 / 3)
    psi = ground_state(h).state
    obs = magnetization_observable(4, 0.5, psi)
    m = np.linspace(-10, 10, 20001)
    dens = outcome_density(psi, obs.centered(), 1.0, m)
    assert np.trapezoid(dens, m) == pytest.approx(1.0, abs=1e-8)


def test_measure_weak_eigenstate_fixed_point():
    psi = np.zeros(4, dtype=complex)
    psi[2] = 1.0
    obs = magnetization_observable(2, 0.5)
    rng = np.random.default_rng(0)
    m, post = measure_weak(psi, obs, 1.0, rng)
    assert np.allclose(np.abs(post), np.abs(psi), atol=1e-12)
    assert np.isfinite(m)


def test_measure_weak_projective_limit():
    # gamma >> level spacing: collapse onto one eigenspace with Born weights
    values = magnetization_observable(2, 0.5).values  # (2, 0, 0, -2)/sqrt(2)
    psi = np.array([np.sqrt(0.3), 0, 0, np.sqrt(0.7)], dtype=complex)
    obs = magnetization_observable(2, 0.5)
    rng = np.random.default_rng(7)
    hits = 0
    for _ in range(400):
        m, post = measure_weak(psi, obs, 50.0, rng)
        weights = np.abs(post) ** 2
        top = values[np.argmax(weights)]
        assert weights.max() > 1 - 1e-10  # fully collapsed
        assert abs(m - top) < 0.2
        hits += top > 0
    assert abs(hits / 400 - 0.3) < 0.07  # Born rule, ~4 sigma band


def test_measure_weak_validation():
    obs = magnetization_observable(2, 0.5)
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidInputError):
        measure_weak(np.ones(4) / 2, obs, -1.0, rng)
    with pytest.raises(InvalidInputError):
        measure_weak(np.ones(4), obs, 1.0, rng)  # unnormalized


def test_sampling_matches_density():
    h = build_hamiltonian(4, 2 / 3)
    psi = ground_state(h).state
    obs = magnetization_observable(4, 0.5, psi)
    rng = np.random.default_rng(11)
    draws = np.array([measure_weak(psi, obs, 1.0, rng)[0] for _ in range(20000)])
    values = obs.centered()
    weights = np.abs(psi) ** 2

    def cdf(m):
        return np.array([
            float(weights @ stats.norm.cdf(x, loc=values, scale=1 / np.sqrt(2)))
            for x in np.atleast_1d(m)])

    res = stats.kstest(draws, cdf)
    assert res.pvalue > 0.01


def test_global_phase_invariance():
    h = build_hamiltonian(3, 1.0)
    psi = ground_state(h).state
    obs = magnetization_observable(3, 0.5, psi)
    sched = MeasurementSchedule(times=[0.0, 0.5], gammas=[1.0, 1.0])
    rec1 = run_trajectory(psi, h, obs, sched, seed=42)
    rec2 = run_trajectory(psi * np.exp(0.3j), h, obs, sched, seed=42)
    # identical up to roundoff of |psi_z e^{i phi}|^2 in the sampling weights
    assert np.allclose(rec1.outcomes, rec2.outcomes, atol=1e-10)


def test_run_trajectory_reproducible():
    h = build_hamiltonian(4, 2 / 3)
    psi = ground_state(h).state
    obs = magnetization_observable(4, 0.5, psi)
    sched = MeasurementSchedule(times=[0.0, 0.5, 1.0], gammas=[1.0, 0.7, 1.5])
    rec1 = run_trajectory(psi, h, obs, sched, seed=9)
    rec2 = run_trajectory(psi, h, obs, sched, seed=9)
    assert np.array_equal(rec1.outcomes, rec2.outcomes)
    rec3 = run_trajectory(psi, h, obs, sched, seed=10)
    assert not np.array_equal(rec1.outcomes, rec3.outcomes)


def test_batched_equals_serial():
    h = build_hamiltonian(4, 2 / 3)
    psi = ground_state(h).state
    obs = magnetization_observable(4, 0.5, psi)
    sched = MeasurementSchedule(times=[0.0, 1.0], gammas=[1.0, 1.0])
    shots, master = 37, 5
    batched = run_trajectories(psi, h, obs, sched, shots, master, batch_size=37)
    seeds = np.random.SeedSequence(master).spawn(shots)
    serial = np.stack([
        run_trajectory(psi, h, obs, sched, seed=s).outcomes for s in seeds])
    assert np.array_equal(batched, serial)


def test_batch_size_invariance():
    h = build_hamiltonian(4, 1.0)
    psi = haar_random_state(4, seed=1)
    obs = magnetization_observable(4, 0.5, psi)
    sched = MeasurementSchedule(times=[0.0, 0.7], gammas=[0.8, 0.8])
    a = run_trajectories(psi, h, obs, sched, 50, 3, batch_size=7)
    b = run_trajectories(psi, h, obs, sched, 50, 3, batch_size=64)
    assert np.array_equal(a, b)


def test_worker_count_invariance():
    h = build_hamiltonian(3, 2 / 3)
    psi = ground_state(h).state
    obs = magnetization_observable(3, 0.5, psi)
    sched = MeasurementSchedule(times=[0.0, 0.5], gammas=[1.0, 1.0])
    a = run_trajectories(psi, h, obs, sched, 40, 2, batch_size=10, workers=1)
    b = run_trajectories(psi, h, obs, sched, 40, 2, batch_size=10, workers=2)
    assert np.array_equal(a, b)


def test_single_event_outcome_variance_free_spins():
    # Var(m) = C(0,0) + 1/(2 gamma^2) = 1 + 1/2 for the free-spin ground state
    h = build_hamiltonian(6, 0.0)
    psi = ground_state(h).state
    obs = magnetization_observable(6, 0.5, psi)
    sched = MeasurementSchedule(times=[0.0], gammas=[1.0])
    out = run_trajectories(psi, h, obs, sched, 20000, 1)
    var = out[:, 0].var()
    se = out[:, 0].var() * np.sqrt(2 / 20000)  # rough normal-theory error
    assert abs(var - 1.5) < 5 * se


def test_averaged_channel_is_exact_dephasing():
    """Integrating K_m rho K_m over outcomes must damp coherences by
    exp(-gamma^2 (q_z - q_z')^2 / 4): checked by Gauss-Hermite quadrature."""
    L, gamma = 3, 0.9
    rng = np.random.default_rng(4)
    obs = magnetization_observable(L, 0.5)
    q = obs.values
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    nodes, wts = roots_hermite(120)
    avg = np.zeros_like(rho)
    for x, w in zip(nodes, wts):
        # substitute m = x/gamma + q-midpoint handled by full kernel instead:
        m = x / gamma
        k = np.exp(-(gamma**2) * (m - q) ** 2 / 2 + x**2 / 2)  # undo GH weight
        kr = k[:, None] * rho * k[None, :]
        avg += (w * gamma / np.sqrt(np.pi)) * kr / gamma
    target = rho * np.exp(-(gamma**2) * (q[:, None] - q[None, :]) ** 2 / 4)
    assert np.allclose(avg, target, atol=1e-8)
    # unitality: the maximally mixed state is preserved exactly
    assert np.allclose(np.diag(np.diag(target)), np.diag(np.diag(rho)), atol=1e-12)
