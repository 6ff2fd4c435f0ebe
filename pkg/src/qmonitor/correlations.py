"""Containers for two-time correlation data and spectral functions.

``CorrelationData`` holds the symmetrized (Keldysh) correlator C(t, s) and
the causal response function chi(t, s) of the monitored fluctuation on a
time grid, together with the per-event measurement strengths.  It is the
sole input of the Gaussian ancilla theory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PSD_TOL = 1e-10


class InvalidInputError(ValueError):
    """Raised when structured numeric input violates its invariants."""


@dataclass(frozen=True)
class CorrelationData:
    """Two-time correlation functions on an ascending time grid.

    Attributes
    ----------
    times:
        Ascending measurement times, shape (n,).
    gammas:
        Positive measurement strengths, one per time, shape (n,).
    keldysh:
        Symmetric PSD matrix C(t, s) = Re<q_t q_s> - <q_t><q_s>, shape (n, n).
    response:
        Causal response chi(t, s); zero for t <= s, shape (n, n).
    """

    times: np.ndarray
    gammas: np.ndarray
    keldysh: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        gammas = np.atleast_1d(np.asarray(self.gammas, dtype=float))
        keldysh = np.atleast_2d(np.asarray(self.keldysh, dtype=float))
        response = np.atleast_2d(np.asarray(self.response, dtype=float))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "keldysh", keldysh)
        object.__setattr__(self, "response", response)
        self.validate()

    @property
    def n(self) -> int:
        return len(self.times)

    def validate(self) -> None:
        n = self.n
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise InvalidInputError("times must be strictly ascending")
        if self.gammas.shape != (n,) or not np.all(np.isfinite(self.gammas)):
            raise InvalidInputError("gammas must be finite with one entry per time")
        if np.any(self.gammas <= 0):
            raise InvalidInputError("gammas must be positive")
        if self.keldysh.shape != (n, n) or self.response.shape != (n, n):
            raise InvalidInputError("keldysh and response must be n x n")
        if not np.allclose(self.keldysh, self.keldysh.T, atol=PSD_TOL):
            raise InvalidInputError("keldysh matrix must be symmetric")
        lam_min = float(np.linalg.eigvalsh(self.keldysh).min())
        if lam_min < -PSD_TOL:
            raise InvalidInputError(
                f"keldysh matrix has negative eigenvalue {lam_min:.3e}"
            )
        # causality: chi(t, s) = 0 whenever t <= s (diagonal included)
        upper = np.triu(self.response)
        if np.any(upper != 0.0):
            raise InvalidInputError("response must vanish on and above the diagonal")

    def scaled_keldysh(self) -> np.ndarray:
        """C_scaled = [gamma_t C(t, s) gamma_s]."""
        g = self.gammas
        return g[:, None] * self.keldysh * g[None, :]

    def scaled_response(self) -> np.ndarray:
        """R = [gamma_t chi(t, s) gamma_s]."""
        g = self.gammas
        return g[:, None] * self.response * g[None, :]


@dataclass(frozen=True)
class SpectralFunctions:
    """Stationary correlation spectra on a frequency grid.

    Attributes
    ----------
    omegas:
        Strictly ascending frequency grid.
    c_omega:
        Nonnegative Keldysh spectrum C(omega) on the grid.
    chi_omega:
        Response spectrum chi(omega); may be complex.
    beta:
        Nonnegative inverse temperature of the initial system state.
    """

    omegas: np.ndarray
    c_omega: np.ndarray
    chi_omega: np.ndarray
    beta: float = 0.0

    def __post_init__(self):
        omegas = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        c_omega = np.atleast_1d(np.asarray(self.c_omega, dtype=float))
        chi_omega = np.atleast_1d(np.asarray(self.chi_omega, dtype=complex))
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "c_omega", c_omega)
        object.__setattr__(self, "chi_omega", chi_omega)
        if np.any(np.diff(omegas) <= 0):
            raise InvalidInputError("frequency grid must be strictly ascending")
        if c_omega.shape != omegas.shape or chi_omega.shape != omegas.shape:
            raise InvalidInputError("spectra must match the frequency grid")
        if np.any(c_omega < 0):
            raise InvalidInputError("C(omega) must be nonnegative")
        if self.beta < 0:
            raise InvalidInputError("beta must be nonnegative")
