"""Closed-form Gaussian predictions for the ancilla register.

Everything here is system-independent: given the Keldysh correlator C(t, s),
the response function chi(t, s) and the measurement strengths, the ancilla
register after the interactions is a zero-mean Gaussian state.  This module
computes its covariance blocks, the joint outcome distribution, its Renyi and
von Neumann entropies, the canonical transform to normal modes, and the
continuum-limit entropy/purification rate integrals.

Conventions
-----------
* Vacuum quadrature variance is 1/2 (so the noiseless covariance is I/2).
* Symplectic form Omega = [[0, I], [-I, 0]] in (x..., p...) ordering.
* The stored cross block ``gxp`` is the symmetrized correlator
  <{x_t, p_s}>/2 of the post-interaction state, which equals R/2 with
  R = [gamma_t chi(t, s) gamma_s].  Storing the symmetrized value keeps the
  assembled 2n x 2n matrix a bona fide quantum covariance (it satisfies the
  uncertainty condition, and its Schur determinant identity
  det(2G) = det(I + 2C) makes the second Renyi entropy independent of chi).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlations import CorrelationData, InvalidInputError, SpectralFunctions

EIG_CLAMP = 1e-12
UNCERTAINTY_TOL = 1e-9


def symplectic_form(n: int) -> np.ndarray:
    """Omega = [[0, I], [-I, 0]] for n modes in (x..., p...) ordering."""
    zero = np.zeros((n, n))
    eye = np.eye(n)
    return np.block([[zero, eye], [-eye, zero]])


def _clamped_eigh(c_scaled: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric PSD matrix, descending eigenvalues.

    Eigenvalues in [-EIG_CLAMP, 0] are clamped to 0 (Gram-matrix noise);
    anything below raises.
    """
    c_scaled = np.atleast_2d(np.asarray(c_scaled, dtype=float))
    if not np.allclose(c_scaled, c_scaled.T, atol=1e-10):
        raise InvalidInputError("matrix must be symmetric")
    lam, u = np.linalg.eigh(c_scaled)
    if lam.min() < -EIG_CLAMP:
        raise InvalidInputError(
            f"matrix has negative eigenvalue {lam.min():.3e} beyond tolerance"
        )
    lam = np.clip(lam, 0.0, None)
    order = np.argsort(-lam, kind="stable")  # descending, ties keep eigh order
    return lam[order], u[:, order]


@dataclass(frozen=True)
class CovarianceBlocks:
    """Covariance blocks of the post-interaction ancilla register.

    gxx = I/2 + C_scaled + R R^T / 2, gxp = R/2, gpp = I/2, with
    C_scaled = [gamma_t C(t,s) gamma_s] and R = [gamma_t chi(t,s) gamma_s].
    """

    gxx: np.ndarray
    gxp: np.ndarray
    gpp: np.ndarray

    @property
    def n(self) -> int:
        return self.gxx.shape[0]

    def assemble(self) -> np.ndarray:
        """Full 2n x 2n covariance [[gxx, gxp], [gxp^T, gpp]]."""
        return np.block([[self.gxx, self.gxp], [self.gxp.T, self.gpp]])

    def validate(self, tol: float = UNCERTAINTY_TOL) -> None:
        n = self.n
        if not np.allclose(self.gpp, np.eye(n) / 2, atol=tol):
            raise InvalidInputError("gpp block must be I/2")
        if not np.allclose(self.gxx, self.gxx.T, atol=tol):
            raise InvalidInputError("gxx block must be symmetric")
        g = self.assemble()
        herm = g + 0.5j * symplectic_form(n)
        min_ev = float(np.linalg.eigvalsh(herm).min())
        if min_ev < -tol:
            raise InvalidInputError(
                f"uncertainty condition violated: min eig(G + i Omega/2) = {min_ev:.3e}"
            )


def build_covariance_blocks(corr: CorrelationData) -> CovarianceBlocks:
    """Covariance blocks of the ancilla register after n weak measurements."""
    n = corr.n
    c_scaled = corr.scaled_keldysh()
    _clamped_eigh(corr.keldysh)  # reject non-PSD input with the offending eigenvalue
    r = corr.scaled_response()
    eye = np.eye(n)
    gxx = eye / 2 + c_scaled + r @ r.T / 2
    return CovarianceBlocks(gxx=gxx, gxp=r / 2, gpp=eye / 2)


def outcome_covariance(corr: CorrelationData) -> np.ndarray:
    """Covariance <x_t x_s> of the recorded (rescaled) outcomes.

    <x_t x_s> = delta_ts/2
              + gamma_t gamma_s [C(t,s) + sum_u (gamma_u^2/2) chi(t,u) chi(s,u)].
    Entrywise identical to the gxx block.
    """
    g = corr.gammas
    chi = corr.response
    backreaction = chi @ np.diag(g**2 / 2) @ chi.T
    return np.eye(corr.n) / 2 + g[:, None] * (corr.keldysh + backreaction) * g[None, :]


def cross_block(corr: CorrelationData) -> np.ndarray:
    """Response matrix R = [gamma_t chi(t, s) gamma_s].

    This is the scaled linear-response function encoded in the ancilla
    position-momentum correlations; the symmetrized correlator stored in
    ``CovarianceBlocks.gxp`` is half of it.
    """
    return corr.scaled_response()


def two_time_prediction(
    gamma0: float,
    gammat: float,
    c00: float,
    ctt: float,
    c0t: float,
    chi_t0: float,
) -> dict[str, float]:
    """Joint outcome statistics of the minimal two-measurement setup.

    Returns var0 = 1/2 + gamma0^2 C(0,0),
            vart = 1/2 + gammat^2 (C(t,t) + gamma0^2 chi(t,0)^2 / 2),
            cov  = gammat gamma0 C(t,0).
    """
    if gamma0 < 0 or gammat <= 0:
        raise InvalidInputError("measurement strengths must be positive")
    var0 = 0.5 + gamma0**2 * c00
    vart = 0.5 + gammat**2 * (ctt + gamma0**2 * chi_t0**2 / 2)
    cov = gammat * gamma0 * c0t
    return {"var0": var0, "vart": vart, "cov": cov}


# ---------------------------------------------------------------------------
# Entropies
# ---------------------------------------------------------------------------


def oscillator_renyi(eps: np.ndarray, m: int) -> np.ndarray:
    """m-th Renyi entropy of a unit-frequency oscillator at mean energy eps."""
    eps = np.asarray(eps, dtype=float)
    lp = eps + 0.5
    lm = np.clip(eps - 0.5, 0.0, None)
    return np.log(lp**m - lm**m) / (m - 1)


def oscillator_von_neumann(eps: np.ndarray) -> np.ndarray:
    """Von Neumann entropy of an oscillator at mean energy eps (0 ln 0 := 0)."""
    eps = np.asarray(eps, dtype=float)
    lp = eps + 0.5
    lm = np.clip(eps - 0.5, 0.0, None)
    out = lp * np.log(lp)
    out = out - np.where(lm > 0.0, lm * np.log(np.where(lm > 0.0, lm, 1.0)), 0.0)
    return out


def _mode_energies(c_scaled: np.ndarray) -> np.ndarray:
    lam, _ = _clamped_eigh(c_scaled)
    return np.sqrt(1.0 + 2.0 * lam) / 2.0


def renyi_entropy(c_scaled: np.ndarray, m: int) -> float:
    """Total m-th Renyi entropy of the ancilla register from C_scaled.

    S_m = (m-1)^{-1} tr ln [C_+^m - C_-^m] with
    C_pm = (I + 2C)^{1/2}/2 +- I/2; for m = 2 this reduces to
    (1/2) tr ln(I + 2C).
    """
    if int(m) != m or m < 2:
        raise InvalidInputError("Renyi order m must be an integer >= 2")
    return float(np.sum(oscillator_renyi(_mode_energies(c_scaled), int(m))))


def von_neumann_entropy(c_scaled: np.ndarray) -> float:
    """Von Neumann entropy S = tr[C_+ ln C_+ - C_- ln C_-]."""
    return float(np.sum(oscillator_von_neumann(_mode_energies(c_scaled))))


def intrinsic_covariance(c_scaled: np.ndarray) -> np.ndarray:
    """Ancilla covariance with the backreaction dressing removed.

    diag(I/2 + C_scaled, I/2): the part of the register state that carries
    the intrinsic fluctuation statistics and fixes all entropies.
    """
    c_scaled = np.atleast_2d(np.asarray(c_scaled, dtype=float))
    n = c_scaled.shape[0]
    zero = np.zeros((n, n))
    return np.block([[np.eye(n) / 2 + c_scaled, zero], [zero, np.eye(n) / 2]])


def canonical_transform(c_scaled: np.ndarray) -> np.ndarray:
    """Symplectic transform reducing the intrinsic covariance to normal form.

    A = [[(I+2C)^{1/4} U, 0], [0, (I+2C)^{-1/4} U]] with C = U Lambda U^T
    (descending eigenvalues).  A is symplectic and
    A^{-1} G0 A^{-T} = diag((I+2Lambda)^{1/2}, (I+2Lambda)^{1/2}) / 2
    for G0 = intrinsic_covariance(C): n uncoupled unit-frequency oscillators
    at mean energies (1 + 2 lambda_k)^{1/2} / 2.
    """
    lam, u = _clamped_eigh(c_scaled)
    n = len(lam)
    quarter = (1.0 + 2.0 * lam) ** 0.25
    top = u * quarter[None, :]  # (I+2C)^{1/4} U = U diag((1+2 lambda)^{1/4})
    bot = u * (1.0 / quarter)[None, :]
    zero = np.zeros((n, n))
    return np.block([[top, zero], [zero, bot]])


def symplectic_eigenvalues(g: np.ndarray) -> np.ndarray:
    """Williamson spectrum of a 2n x 2n covariance matrix, ascending."""
    n = g.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ g))
    ev = np.sort(ev)
    return (ev[0::2] + ev[1::2]) / 2  # eigenvalues come in +-nu pairs


def entropy_from_full_covariance(blocks: CovarianceBlocks, m: int | str) -> float:
    """Entropy via the symplectic spectrum of the assembled 2n x 2n covariance.

    Independent route: Williamson eigenvalues nu_k of the full covariance,
    summing the single-oscillator entropy at eps = nu_k.  For m = 2 this is
    exactly the C-only formula for any response matrix (Schur determinant
    identity); see ``renyi_entropy``.
    """
    blocks.validate()
    nus = symplectic_eigenvalues(blocks.assemble())
    if np.any(nus < 0.5 - UNCERTAINTY_TOL):
        raise InvalidInputError(
            f"symplectic eigenvalue {nus.min():.12f} below the vacuum floor 1/2"
        )
    nus = np.clip(nus, 0.5, None)
    if m == "vn":
        return float(np.sum(oscillator_von_neumann(nus)))
    return float(np.sum(oscillator_renyi(nus, int(m))))


# ---------------------------------------------------------------------------
# Continuum rate integrals
# ---------------------------------------------------------------------------


def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.trapezoid(y, x) if hasattr(np, "trapezoid") else np.trapz(y, x))


def s2_rate(spec: SpectralFunctions) -> float:
    """Second-Renyi entropy growth rate per unit time.

    integral dw/(2 pi) * (1/2) ln(1 + C(w)), composite trapezoid on the
    caller's grid.
    """
    integrand = 0.5 * np.log1p(spec.c_omega)
    return _trapezoid(integrand, spec.omegas) / (2 * np.pi)


def purification_rate(spec: SpectralFunctions, kind: str) -> float:
    """Average purification rate of the monitored system.

    integral dw/(4 pi) * weight(beta w) * C / (1 + C + |chi|^2/4), with
    weight = beta w / sinh(beta w) for kind="vn" and sech^2(beta w / 2) for
    kind="renyi2".  Both weights equal 1 at w = 0 and at beta = 0.
    """
    bw = spec.beta * spec.omegas
    if kind == "vn":
        # overflow-safe x/sinh(x) = 2 x e^{-|x|} / (1 - e^{-2|x|})
        weight = np.ones_like(bw)
        nz = np.abs(bw) > 1e-12
        ax = np.abs(bw[nz])
        weight[nz] = 2.0 * ax * np.exp(-ax) / (1.0 - np.exp(-2.0 * ax))
    elif kind == "renyi2":
        weight = 1.0 / np.cosh(bw / 2) ** 2
    else:
        raise InvalidInputError(f"unknown purification rate kind {kind!r}")
    integrand = weight * spec.c_omega / (1.0 + spec.c_omega + np.abs(spec.chi_omega) ** 2 / 4)
    return _trapezoid(integrand, spec.omegas) / (4 * np.pi)
