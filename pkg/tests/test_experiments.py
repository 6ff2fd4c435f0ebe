"""Tests of the experiment drivers and their statistics helpers."""

import numpy as np
import pytest

from qmonitor.correlations import InvalidInputError
from qmonitor.experiments import (
    ExperimentConfig,
    SummaryStats,
    _jackknife_covariance_se,
    _jackknife_delta,
    bimodality_report,
    critical_experiment,
    freedman_diaconis_edges,
    haar_average,
    two_time_experiment,
    validate_covariance,
    wick_check,
)


def test_config_validation():
    ExperimentConfig(L=4, J=1.0)
    with pytest.raises(InvalidInputError):
        ExperimentConfig(L=4, J=1.0, shots=0)
    with pytest.raises(InvalidInputError):
        ExperimentConfig(L=4, J=1.0, initial="thermal")
    with pytest.raises(InvalidInputError):
        ExperimentConfig(L=4, J=1.0, bin_width=-0.1)


def test_freedman_diaconis_edges():
    rng = np.random.default_rng(0)
    samples = rng.normal(size=4000)
    edges = freedman_diaconis_edges(samples)
    iqr = np.subtract(*np.percentile(samples, [75, 25]))
    width = 2 * iqr / 4000 ** (1 / 3)
    assert np.allclose(np.diff(edges), width)
    assert edges[0] <= samples.min() and edges[-1] >= samples.max()
    fixed = freedman_diaconis_edges(samples, bin_width=0.5)
    assert np.allclose(np.diff(fixed), 0.5)


def test_summary_stats_mass_and_moments():
    rng = np.random.default_rng(1)
    outcomes = rng.normal(size=(3000, 2))
    gammas = np.array([1.0, 2.0])
    stats_ = SummaryStats.from_outcomes(outcomes, gammas)
    assert stats_.marginals.sum(axis=1).tolist() == [3000, 3000]
    assert stats_.joint.sum() == 3000
    assert np.all(stats_.variances_m >= 0)
    x = outcomes * gammas[None, :]
    assert np.allclose(stats_.variances_x, x.var(axis=0))
    assert np.allclose(stats_.covariance_x,
                       np.cov(x.T, bias=True), atol=1e-12)


def test_jackknife_delta_matches_brute_force():
    rng = np.random.default_rng(2)
    x0, x1 = rng.normal(size=200), 1.5 * rng.normal(size=200)
    delta, se = _jackknife_delta(x0, x1)
    assert delta == pytest.approx(x1.var() - x0.var())
    n = len(x0)
    loo = np.array([
        np.delete(x1, i).var() - np.delete(x0, i).var() for i in range(n)])
    se_ref = np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    assert se == pytest.approx(se_ref, rel=1e-10)


def test_jackknife_covariance_se_matches_brute_force():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(150, 3))
    fast = _jackknife_covariance_se(x)
    n = len(x)
    loo = np.stack([np.cov(np.delete(x, i, axis=0).T, bias=True)
                    for i in range(n)])
    se_ref = np.sqrt((n - 1) / n * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    assert np.allclose(fast, se_ref, rtol=1e-8)


def test_jackknife_se_calibrated_on_gaussian():
    # jackknife SE of the variance should track the normal-theory value
    rng = np.random.default_rng(4)
    n = 5000
    _, se = _jackknife_delta(rng.normal(size=n), 10 + rng.normal(size=n))
    # Var(delta) = Var(var(x1)) + Var(var(x0)) = 2 * 2 sigma^4 / n
    assert se == pytest.approx(np.sqrt(4 / n), rel=0.15)


def test_bimodality_report():
    edges = np.linspace(-2, 2, 9)
    bimodal = np.array([1, 10, 3, 1, 1, 2, 12, 1])
    rep = bimodality_report(bimodal, edges)
    assert rep["peak_left"] == 10 and rep["peak_right"] == 12
    assert rep["interior_min"] == 1
    unimodal = np.array([1, 2, 5, 9, 10, 6, 3, 1])
    rep = bimodality_report(unimodal, edges)
    assert rep["interior_min"] >= 0.8 * min(rep["peak_left"], rep["peak_right"])


def test_wick_check_free_spins_combinatorial():
    rows = wick_check(0.0, [4, 6, 8])
    for r in rows:
        assert r.q2 == pytest.approx(1.0, abs=1e-8)
        assert r.ratio == pytest.approx(-2.0 / r.L, abs=1e-8)


def test_wick_ratio_gaussian_control():
    # the connected-ratio statistic vanishes for genuinely Gaussian data
    rng = np.random.default_rng(5)
    q = rng.normal(size=2_000_000)
    q2, q4 = (q**2).mean(), (q**4).mean()
    assert (q4 - 3 * q2**2) / q2**2 == pytest.approx(0.0, abs=0.01)


def test_two_time_experiment_smoke():
    cfg = ExperimentConfig(L=6, J=2 / 3, times=(0.0, 1.0), gammas=(1.0, 1.0),
                           shots=500, seed=0)
    res = two_time_experiment(cfg)
    assert res.outcomes.shape == (500, 2)
    assert res.delta_se > 0
    assert set(res.prediction) == {"var0", "vart", "cov"}
    assert res.delta_predicted == pytest.approx(
        res.prediction["vart"] - res.prediction["var0"])
    # determinism
    res2 = two_time_experiment(cfg)
    assert np.array_equal(res.outcomes, res2.outcomes)


def test_two_time_experiment_needs_two_events():
    cfg = ExperimentConfig(L=4, J=1.0, times=(0.0, 0.5, 1.0),
                           gammas=(1.0, 1.0, 1.0), shots=10)
    with pytest.raises(InvalidInputError):
        two_time_experiment(cfg)


def test_ground_state_delta_dominates_haar_delta():
    # eigenstate control: coherent response makes delta large, while Haar
    # states (maximally mixed proxy) give delta compatible with noise
    cfg = ExperimentConfig(L=8, J=2 / 3, times=(0.0, 1.0), gammas=(1.0, 1.0),
                           shots=2000, seed=0)
    ground = two_time_experiment(cfg)
    assert ground.delta_x > 5 * ground.delta_se
    rows = haar_average(cfg, [8], n_states=4)
    assert rows[0].mean_abs_delta < 0.3 * ground.delta_x


def test_haar_average_validation():
    cfg = ExperimentConfig(L=4, J=1.0, shots=10)
    with pytest.raises(InvalidInputError):
        haar_average(cfg, [4], n_states=1)


def test_validate_covariance_needs_three_events():
    cfg = ExperimentConfig(L=4, J=1.0, times=(0.0, 1.0), gammas=(1.0, 1.0),
                           shots=10)
    with pytest.raises(InvalidInputError):
        validate_covariance(cfg)


def test_critical_pipeline_rejects_off_critical():
    # away from criticality the backreaction shifts the t=1 marginal, so the
    # two-sample KS test must reject equality
    cfg = ExperimentConfig(L=10, J=2 / 3, alpha=0.5, times=(0.0, 1.0),
                           gammas=(1.0, 1.0), shots=4000, seed=0)
    res = critical_experiment(cfg)
    assert res.ks_pvalue < 0.01
    assert res.stats.marginals.shape[0] == 2
