"""Weak monitoring of macroscopic fluctuations in quantum spin chains.

Two halves that cross-validate each other:

* ``spin_chain`` + ``weak_measurement``: exact many-body simulation of
  sequentially weak-measured magnetization fluctuations in the quantum
  Ising chain (sparse Hamiltonians, Krylov propagation, exact outcome
  sampling).
* ``gaussian_theory``: closed-form predictions for the ancilla register
  (covariance blocks, outcome statistics, entropies, canonical transform,
  continuum rate integrals) computed from two-time correlation data.

``experiments`` reproduces the quantitative claims by running both halves
against each other; ``cli`` exposes everything as subcommands.
"""

from .correlations import CorrelationData, SpectralFunctions
from .gaussian_theory import (
    CovarianceBlocks,
    build_covariance_blocks,
    canonical_transform,
    cross_block,
    entropy_from_full_covariance,
    outcome_covariance,
    purification_rate,
    renyi_entropy,
    s2_rate,
    two_time_prediction,
    von_neumann_entropy,
)
from .spin_chain import (
    DiagonalObservable,
    SparseHamiltonian,
    build_hamiltonian,
    evolve,
    ground_state,
    haar_random_state,
    magnetization_observable,
    two_point_functions,
)
from .experiments import (
    ExperimentConfig,
    SummaryStats,
    critical_experiment,
    gamma_sweep,
    haar_average,
    two_time_experiment,
    validate_covariance,
    wick_check,
)
from .weak_measurement import (
    MeasurementSchedule,
    TrajectoryRecord,
    measure_weak,
    outcome_density,
    run_trajectories,
    run_trajectory,
)

__version__ = "0.1.0"
