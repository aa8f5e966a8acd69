"""Shared dense-matrix oracles for the test suite.

The oracles build operators as explicit Kronecker products (qubit 0 = first
factor = most significant bit) so every engine result can be checked against
plain linear algebra.
"""

import numpy as np
import pytest

from qite_udmis.pauli import PauliString

PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_string(p: PauliString, n_qubits: int) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a Pauli string."""
    letters = dict(p.support)
    mat = PAULI_MATS[letters.get(0, "I")]
    for q in range(1, n_qubits):
        mat = np.kron(mat, PAULI_MATS[letters.get(q, "I")])
    return mat


def dense_hamiltonian(h) -> np.ndarray:
    """Dense diagonal matrix from a DiagonalHamiltonian."""
    return np.diag(h.energies()).astype(complex)


def random_state_vector(n_qubits: int, seed: int, real: bool = False) -> np.ndarray:
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(1 << n_qubits)
    if not real:
        amps = amps + 1j * rng.standard_normal(1 << n_qubits)
    return amps / np.linalg.norm(amps)


@pytest.fixture(scope="session")
def benchmark_instance():
    """The 6-qubit benchmark graph with its Hamiltonian and spectrum."""
    from qite_udmis.graph import benchmark_graph_6q
    from qite_udmis.hamiltonian import from_udmis, spectrum

    g = benchmark_graph_6q()
    h = from_udmis(g, 1.35)
    return g, h, spectrum(h)
