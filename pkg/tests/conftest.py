"""Shared fixtures and generators for the test suite."""

import numpy as np
import pytest

from qmonitor.correlations import CorrelationData


def random_correlation_data(rng: np.random.Generator, n: int,
                            scale: float = 1.0,
                            zero_response: bool = False) -> CorrelationData:
    """Random CorrelationData satisfying all physical invariants.

    The full (non-symmetrized) two-point function K(t, s) = <q_t q_s> of any
    quantum state is a Hermitian PSD Gram matrix; its real part is the
    Keldysh correlator and twice its lower-triangular imaginary part is the
    causal response.  Generating K = B B^H therefore yields a (C, chi) pair
    whose induced ancilla covariance automatically satisfies the uncertainty
    condition.
    """
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    k = (b @ b.conj().T) * scale / n
    keldysh = k.real
    response = np.zeros((n, n))
    if not zero_response:
        for i in range(n):
            for j in range(i):
                response[i, j] = 2.0 * k[i, j].imag
    times = np.cumsum(rng.uniform(0.1, 1.0, size=n))
    gammas = rng.uniform(0.3, 2.0, size=n)
    return CorrelationData(times=times, gammas=gammas,
                           keldysh=keldysh, response=response)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
