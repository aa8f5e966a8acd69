"""Imaginary-time-evolution solver for unit-disk maximum-independent-set problems."""

from .analysis import (
    FailureSpec,
    TrajectoryRecord,
    failure_prob,
    failure_prob_ite_closed,
    lemma1_theta_max,
    relative_error,
    thm1_bound,
    thm2_check,
    trajectory_metrics,
)
from .graph import (
    UnitDiskGraph,
    benchmark_graph_6q,
    brute_force_mis,
    is_independent,
    load_graph,
    random_unit_disk,
    save_graph,
)
from .hamiltonian import DiagonalHamiltonian, Spectrum, energy, from_udmis, spectrum, term_decomposition
from .ite import ite_state, ite_trajectory
from .pauli import PauliString, PauliTerm, enumerate_basis, mul
from .qite import (
    DomainSet,
    QiteConfig,
    SubstepSolution,
    build_domain_A,
    build_domain_B,
    build_domains,
    qite_evolve,
    solve_substep,
    substep_linear_system,
    substep_residual,
)
from .runner import ExperimentConfig, run_campaign, run_characterization
from .sampler import SolveResult, failure_rate_empirical, measure_shots, solve
from .state import (
    StateVector,
    apply_diagonal_imaginary,
    apply_pauli_rotation,
    expect,
    fidelity,
    norm_distance,
    plus_state,
)

__version__ = "0.1.0"
