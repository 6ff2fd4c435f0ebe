"""Experiment drivers: Monte-Carlo monitoring runs vs closed-form predictions.

Every driver emits both the empirical estimate and, where defined, the
analytic prediction computed from exact two-time correlation functions;
agreement is quantified in standard-error units via delete-one jackknife.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .correlations import InvalidInputError
from .gaussian_theory import outcome_covariance, two_time_prediction
from .spin_chain import (
    DiagonalObservable,
    SparseHamiltonian,
    build_hamiltonian,
    ground_state,
    haar_random_state,
    magnetization_observable,
    two_point_functions,
)
from .weak_measurement import MeasurementSchedule, run_trajectories


@dataclass
class ExperimentConfig:
    """Common configuration of a monitored-trajectory experiment."""

    L: int
    J: float
    alpha: float = 0.5
    initial: str = "ground"
    times: Sequence[float] = (0.0, 1.0)
    gammas: Sequence[float] = (1.0, 1.0)
    shots: int = 4000
    seed: int = 0
    state_seed: int = 1
    bin_width: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.shots < 1:
            raise InvalidInputError("shots must be >= 1")
        if self.initial not in ("ground", "haar"):
            raise InvalidInputError("initial must be 'ground' or 'haar'")
        if self.bin_width is not None and self.bin_width <= 0:
            raise InvalidInputError("bin width must be positive")

    @property
    def schedule(self) -> MeasurementSchedule:
        return MeasurementSchedule(times=np.asarray(self.times, dtype=float),
                                   gammas=np.asarray(self.gammas, dtype=float))


def _initial_state(cfg: ExperimentConfig, h: SparseHamiltonian) -> np.ndarray:
    if cfg.initial == "ground":
        return ground_state(h, seed=cfg.state_seed).state
    return haar_random_state(cfg.L, cfg.state_seed)


def _prepare(cfg: ExperimentConfig):
    h = build_hamiltonian(cfg.L, cfg.J)
    psi0 = _initial_state(cfg, h)
    obs = magnetization_observable(cfg.L, cfg.alpha, psi0)
    return h, psi0, obs


def freedman_diaconis_edges(samples: np.ndarray, bin_width: float | None = None) -> np.ndarray:
    """Histogram edges with Freedman-Diaconis width unless overridden."""
    lo, hi = samples.min(), samples.max()
    if bin_width is None:
        iqr = np.subtract(*np.percentile(samples, [75, 25]))
        bin_width = 2 * iqr / len(samples) ** (1 / 3)
        if bin_width <= 0:
            bin_width = (hi - lo) / 50 or 1.0
        # guard against a pathologically narrow interquartile range
        bin_width = max(bin_width, (hi - lo) / 4096)
    nbins = max(1, int(np.ceil((hi - lo) / bin_width)))
    return lo + bin_width * np.arange(nbins + 1)


@dataclass
class SummaryStats:
    """Per-event outcome statistics (in detector units m and rescaled x = gamma m)."""

    gammas: np.ndarray
    means_m: np.ndarray
    variances_m: np.ndarray
    variances_x: np.ndarray
    mean_se_m: np.ndarray
    variance_se_x: np.ndarray
    covariance_x: np.ndarray
    covariance_se_x: np.ndarray
    edges: np.ndarray
    marginals: np.ndarray  # (n_events, nbins) counts
    joint: np.ndarray | None  # 2-D histogram of the first two events

    @classmethod
    def from_outcomes(cls, outcomes: np.ndarray, gammas: np.ndarray,
                      bin_width: float | None = None) -> "SummaryStats":
        shots, n = outcomes.shape
        x = outcomes * gammas[None, :]
        means_m = outcomes.mean(axis=0)
        variances_m = outcomes.var(axis=0)
        variances_x = x.var(axis=0)
        mean_se_m = outcomes.std(axis=0, ddof=1) / np.sqrt(shots)
        cov_x = (x.T @ x) / shots - np.outer(x.mean(axis=0), x.mean(axis=0))
        cov_se = _jackknife_covariance_se(x)
        edges = freedman_diaconis_edges(outcomes.ravel(), bin_width)
        marginals = np.stack([np.histogram(outcomes[:, k], bins=edges)[0] for k in range(n)])
        joint = None
        if n >= 2:
            joint = np.histogram2d(outcomes[:, 0], outcomes[:, 1], bins=(edges, edges))[0]
        return cls(gammas=gammas, means_m=means_m, variances_m=variances_m,
                   variances_x=variances_x, mean_se_m=mean_se_m,
                   variance_se_x=np.diag(cov_se).copy(),
                   covariance_x=cov_x, covariance_se_x=cov_se,
                   edges=edges, marginals=marginals, joint=joint)


def _jackknife_covariance_se(x: np.ndarray) -> np.ndarray:
    """Delete-one jackknife standard error of every sample-covariance entry."""
    n = x.shape[0]
    s1 = x.sum(axis=0)
    s2 = np.einsum("ia,ib->ab", x, x)
    # leave-one-out covariance entries, vectorized over the deleted index i
    s1_i = s1[None, :] - x  # (n, k)
    s2_i = s2[None, :, :] - np.einsum("ia,ib->iab", x, x)
    cov_i = s2_i / (n - 1) - np.einsum("ia,ib->iab", s1_i, s1_i) / (n - 1) ** 2
    mean_i = cov_i.mean(axis=0)
    return np.sqrt((n - 1) / n * np.sum((cov_i - mean_i[None]) ** 2, axis=0))


def _jackknife_delta(x0: np.ndarray, x1: np.ndarray) -> tuple[float, float]:
    """delta = Var(x1) - Var(x0) with delete-one jackknife standard error."""
    n = len(x0)
    def loo_var(v):
        s1, s2 = v.sum(), (v**2).sum()
        s1_i, s2_i = s1 - v, s2 - v**2
        return s2_i / (n - 1) - (s1_i / (n - 1)) ** 2
    delta = x1.var() - x0.var()
    d_i = loo_var(x1) - loo_var(x0)
    se = np.sqrt((n - 1) / n * np.sum((d_i - d_i.mean()) ** 2))
    return float(delta), float(se)


@dataclass
class TwoTimeResult:
    config: ExperimentConfig
    outcomes: np.ndarray
    stats: SummaryStats
    delta_x: float
    delta_se: float
    prediction: dict[str, float]
    keldysh: np.ndarray
    response: np.ndarray
    delta_predicted: float


def two_time_experiment(cfg: ExperimentConfig) -> TwoTimeResult:
    """Two-measurement monitoring run plus the exact Gaussian prediction."""
    if len(cfg.times) != 2:
        raise InvalidInputError("two_time_experiment needs exactly 2 events")
    h, psi0, obs = _prepare(cfg)
    sched = cfg.schedule
    outcomes = run_trajectories(psi0, h, obs, sched, cfg.shots, cfg.seed,
                                workers=cfg.workers)
    stats_ = SummaryStats.from_outcomes(outcomes, sched.gammas, cfg.bin_width)
    x = outcomes * sched.gammas[None, :]
    delta, se = _jackknife_delta(x[:, 0], x[:, 1])
    corr = two_point_functions(psi0, h, obs, sched.times, sched.gammas)
    pred = two_time_prediction(
        gamma0=sched.gammas[0], gammat=sched.gammas[1],
        c00=corr.keldysh[0, 0], ctt=corr.keldysh[1, 1],
        c0t=corr.keldysh[1, 0], chi_t0=corr.response[1, 0],
    )
    return TwoTimeResult(config=cfg, outcomes=outcomes, stats=stats_,
                         delta_x=delta, delta_se=se, prediction=pred,
                         keldysh=corr.keldysh, response=corr.response,
                         delta_predicted=pred["vart"] - pred["var0"])


@dataclass
class SweepRow:
    L: int
    gamma: float
    delta: float
    delta_se: float
    delta_predicted: float
    chi: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    slopes: dict[int, float]
    slope_ses: dict[int, float]
    prefactors: dict[int, tuple[float, float]]  # L -> (weighted prefactor, se)
    gamma_star: dict[int, float]


def gamma_sweep(cfg: ExperimentConfig, gammas: Sequence[float], Ls: Sequence[int]) -> SweepResult:
    """delta(gamma, L) table with the gamma^4 prediction and a log-log slope fit."""
    if np.any(np.asarray(gammas) <= 0):
        raise InvalidInputError("all sweep strengths must be positive")
    rows: list[SweepRow] = []
    slopes, slope_ses, prefactors, gamma_star = {}, {}, {}, {}
    for L in Ls:
        per_l: list[SweepRow] = []
        for g in gammas:
            sub = ExperimentConfig(L=L, J=cfg.J, alpha=cfg.alpha, initial=cfg.initial,
                                   times=cfg.times, gammas=(g, g), shots=cfg.shots,
                                   seed=cfg.seed + int(1e6 * g) + 1000 * L,
                                   state_seed=cfg.state_seed, workers=cfg.workers)
            res = two_time_experiment(sub)
            chi = res.response[1, 0]
            per_l.append(SweepRow(L=L, gamma=g, delta=res.delta_x, delta_se=res.delta_se,
                                  delta_predicted=g**4 * chi**2 / 2, chi=chi))
        rows.extend(per_l)
        # breakdown scale: first gamma where data and prediction split by > 5 SE
        g_star = np.inf
        for r in sorted(per_l, key=lambda r: r.gamma):
            if abs(r.delta - r.delta_predicted) > 5 * r.delta_se:
                g_star = r.gamma
                break
        gamma_star[L] = g_star
        window = [r for r in per_l if r.gamma < g_star and r.delta > 0]
        if len(window) >= 2:
            lg = np.log([r.gamma for r in window])
            ld = np.log([r.delta for r in window])
            w = np.array([(r.delta / r.delta_se) ** 2 for r in window])
            slope, slope_se = _weighted_slope(lg, ld, w)
            slopes[L], slope_ses[L] = slope, slope_se
        pref = np.array([r.delta / r.gamma**4 for r in window])
        pref_se = np.array([r.delta_se / r.gamma**4 for r in window])
        wts = 1 / pref_se**2
        prefactors[L] = (float(np.sum(pref * wts) / np.sum(wts)),
                         float(1 / np.sqrt(np.sum(wts))))
    return SweepResult(rows=rows, slopes=slopes, slope_ses=slope_ses,
                       prefactors=prefactors, gamma_star=gamma_star)


def _weighted_slope(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    sw = w.sum()
    xb = (w * x).sum() / sw
    yb = (w * y).sum() / sw
    sxx = (w * (x - xb) ** 2).sum()
    slope = (w * (x - xb) * (y - yb)).sum() / sxx
    return float(slope), float(1 / np.sqrt(sxx))


@dataclass
class HaarRow:
    L: int
    mean_abs_delta: float
    se: float
    deltas: np.ndarray


def haar_average(cfg: ExperimentConfig, Ls: Sequence[int], n_states: int = 32) -> list[HaarRow]:
    """Mean |delta| over Haar-random initial states, with across-state errors."""
    if n_states < 2:
        raise InvalidInputError("need at least 2 Haar states")
    out = []
    for L in Ls:
        deltas = np.empty(n_states)
        for k in range(n_states):
            sub = ExperimentConfig(L=L, J=cfg.J, alpha=cfg.alpha, initial="haar",
                                   times=cfg.times, gammas=cfg.gammas, shots=cfg.shots,
                                   seed=cfg.seed + 7919 * k + 1000 * L,
                                   state_seed=cfg.state_seed + k, workers=cfg.workers)
            h, psi0, obs = _prepare(sub)
            outcomes = run_trajectories(psi0, h, obs, sub.schedule, sub.shots, sub.seed,
                                        workers=sub.workers)
            x = outcomes * sub.schedule.gammas[None, :]
            deltas[k], _ = _jackknife_delta(x[:, 0], x[:, 1])
        abs_d = np.abs(deltas)
        out.append(HaarRow(L=L, mean_abs_delta=float(abs_d.mean()),
                           se=float(abs_d.std(ddof=1) / np.sqrt(n_states)),
                           deltas=deltas))
    return out


@dataclass
class CriticalResult:
    config: ExperimentConfig
    outcomes: np.ndarray
    stats: SummaryStats
    ks_statistic: float
    ks_pvalue: float
    bimodality: list[dict[str, float]]  # per event: peaks and interior minimum


def bimodality_report(counts: np.ndarray, edges: np.ndarray) -> dict[str, float]:
    """Interior minimum between the two histogram peaks left/right of zero."""
    centers = (edges[:-1] + edges[1:]) / 2
    left, right = counts[centers < 0], counts[centers >= 0]
    if len(left) == 0 or len(right) == 0:
        return {"peak_left": 0.0, "peak_right": 0.0, "interior_min": np.inf}
    i_left = int(np.argmax(left))
    i_right = int(np.argmax(right)) + len(left)
    interior = counts[i_left : i_right + 1]
    return {
        "peak_left": float(counts[i_left]),
        "peak_right": float(counts[i_right]),
        "interior_min": float(interior.min()),
    }


def critical_experiment(cfg: ExperimentConfig) -> CriticalResult:
    """Two-time monitoring of the rescaled critical magnetization."""
    if len(cfg.times) != 2:
        raise InvalidInputError("critical_experiment needs exactly 2 events")
    h, psi0, obs = _prepare(cfg)
    sched = cfg.schedule
    outcomes = run_trajectories(psi0, h, obs, sched, cfg.shots, cfg.seed,
                                workers=cfg.workers)
    stats_ = SummaryStats.from_outcomes(outcomes, sched.gammas, cfg.bin_width)
    ks = stats.ks_2samp(outcomes[:, 0], outcomes[:, 1])
    bim = [bimodality_report(stats_.marginals[k], stats_.edges) for k in range(sched.n)]
    return CriticalResult(config=cfg, outcomes=outcomes, stats=stats_,
                          ks_statistic=float(ks.statistic), ks_pvalue=float(ks.pvalue),
                          bimodality=bim)


@dataclass
class CovarianceValidation:
    config: ExperimentConfig
    empirical: np.ndarray
    predicted: np.ndarray
    se: np.ndarray
    max_deviation_se: float
    means_m: np.ndarray
    mean_se_m: np.ndarray


def validate_covariance(cfg: ExperimentConfig) -> CovarianceValidation:
    """Empirical multi-time outcome covariance against the Gaussian prediction."""
    if len(cfg.times) < 3:
        raise InvalidInputError("validate_covariance needs at least 3 events")
    h, psi0, obs = _prepare(cfg)
    sched = cfg.schedule
    outcomes = run_trajectories(psi0, h, obs, sched, cfg.shots, cfg.seed,
                                workers=cfg.workers)
    x = outcomes * sched.gammas[None, :]
    n = sched.n
    empirical = (x.T @ x) / cfg.shots - np.outer(x.mean(axis=0), x.mean(axis=0))
    se = _jackknife_covariance_se(x)
    corr = two_point_functions(psi0, h, obs, sched.times, sched.gammas)
    predicted = outcome_covariance(corr)
    dev = np.abs(empirical - predicted) / se
    stats_ = SummaryStats.from_outcomes(outcomes, sched.gammas, cfg.bin_width)
    return CovarianceValidation(config=cfg, empirical=empirical, predicted=predicted,
                                se=se, max_deviation_se=float(dev.max()),
                                means_m=stats_.means_m, mean_se_m=stats_.mean_se_m)


@dataclass
class WickRow:
    L: int
    q2: float
    q4: float
    ratio: float  # connected 4-point over <q^2>^2


def wick_check(J: float, Ls: Sequence[int], alpha: float = 0.5,
               state_seed: int = 1) -> list[WickRow]:
    """Connected equal-time 4-point function of q in the ground state, per L.

    ratio = (<q^4> - 3 <q^2>^2) / <q^2>^2 must shrink with L if q becomes
    Gaussian in the thermodynamic limit; for J = 0 it equals -2/L exactly.
    """
    rows = []
    for L in Ls:
        h = build_hamiltonian(L, J)
        psi = ground_state(h, seed=state_seed).state
        obs = magnetization_observable(L, alpha, psi)
        q2 = obs.moment(psi, 2)
        q4 = obs.moment(psi, 4)
        rows.append(WickRow(L=L, q2=q2, q4=q4, ratio=(q4 - 3 * q2**2) / q2**2))
    return rows
