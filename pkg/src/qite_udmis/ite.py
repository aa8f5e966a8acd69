"""Exact imaginary-time evolution for diagonal Hamiltonians.

This is the ground-truth evolution the unitary engine is measured against:
normalized exp(-t H) applied to the uniform plus state, computed directly
from the diagonal form (never Trotterized).
"""

import numpy as np

from .hamiltonian import DiagonalHamiltonian
from .state import StateVector, plus_state


def ite_state(h: DiagonalHamiltonian, t: float) -> StateVector:
    """Normalized exp(-t H) |+...+>; amplitudes are real and positive."""
    if not (np.isfinite(t) and t >= 0):
        raise ValueError("t must be finite and >= 0")
    energies = h.energies()
    weights = np.exp(-t * (energies - energies.min()))
    norm = np.linalg.norm(weights)
    if norm == 0.0:
        raise ValueError("all amplitudes underflowed in the imaginary-time weighting")
    return StateVector(h.n_qubits, (weights / norm).astype(np.complex128), copy=False)


def ite_trajectory(h: DiagonalHamiltonian, tau: float, n_steps: int) -> list[StateVector]:
    """States at t = k*tau for k = 0..n_steps."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    out = [plus_state(h.n_qubits)]
    out.extend(ite_state(h, k * tau) for k in range(1, n_steps + 1))
    return out
