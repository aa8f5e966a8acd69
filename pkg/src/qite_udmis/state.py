"""Dense state vectors and the primitive evolutions behind the QITE engine.

Basis convention, shared by every module: basis index i encodes the qubit
bits with qubit 0 as the MOST significant bit, i.e. the bit of qubit q is
``(i >> (n_qubits - 1 - q)) & 1``.

Public operations return renormalized states; a norm drift beyond 1e-8
before renormalization triggers a diagnostic warning.
"""

import struct
import warnings

import numpy as np

from .hamiltonian import DiagonalHamiltonian
from .pauli import PauliString

MAX_QUBITS = 24
ROTATION_DOMAIN_CAP = 10
NORM_TOL = 1e-10
DRIFT_WARN = 1e-8


class StateVector:
    """Unit-norm complex amplitudes over the 2^n computational basis."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, n_qubits: int, amplitudes, copy: bool = True):
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
        amps = np.array(amplitudes, dtype=np.complex128, copy=copy).reshape(-1)
        if amps.size != 1 << n_qubits:
            raise ValueError(f"expected {1 << n_qubits} amplitudes, got {amps.size}")
        norm = np.linalg.norm(amps)
        if norm == 0.0 or not np.isfinite(norm):
            raise ValueError("state has zero or non-finite norm")
        if abs(norm - 1.0) > NORM_TOL:
            amps = amps / norm
        object.__setattr__(self, "n_qubits", int(n_qubits))
        object.__setattr__(self, "amplitudes", amps)

    def __setattr__(self, name, value):
        raise AttributeError("StateVector is immutable; operations return new states")

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes, copy=True)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits})"


def plus_state(n_qubits: int) -> StateVector:
    """Uniform superposition: every amplitude equals 2^(-n/2)."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amp = 2.0 ** (-n_qubits / 2.0)
    return StateVector(n_qubits, np.full(1 << n_qubits, amp, dtype=np.complex128), copy=False)


def basis_state(n_qubits: int, index: int) -> StateVector:
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(n_qubits, amps, copy=False)


def _pauli_masks(p: PauliString, n_qubits: int) -> tuple[int, int, int]:
    """(flip_mask, sign_mask, y_count) for applying `p` to full basis indices."""
    flip = 0
    sign = 0
    y_count = 0
    for qubit, letter in p.support:
        if qubit >= n_qubits:
            raise ValueError(f"{p} acts on qubit {qubit} but the state has {n_qubits} qubits")
        bit = 1 << (n_qubits - 1 - qubit)
        if letter in ("X", "Y"):
            flip |= bit
        if letter in ("Y", "Z"):
            sign |= bit
        if letter == "Y":
            y_count += 1
    return flip, sign, y_count


def _apply_pauli_raw(amps: np.ndarray, n_qubits: int, p: PauliString) -> np.ndarray:
    """sigma_p |psi> on a raw amplitude array (no normalization involved)."""
    flip, sign, y_count = _pauli_masks(p, n_qubits)
    src = np.arange(amps.size, dtype=np.int64) ^ flip
    out = amps[src]
    if sign:
        parity = np.bitwise_count(src & sign) & 1
        out = out * (1.0 - 2.0 * parity)
    if y_count % 4:
        out = out * (1j ** (y_count % 4))
    return out


def apply_pauli(state: StateVector, p: PauliString) -> StateVector:
    """sigma_p |psi>; unitary, so the norm is preserved."""
    return StateVector(state.n_qubits, _apply_pauli_raw(state.amplitudes, state.n_qubits, p), copy=False)


def expect(state: StateVector, p: PauliString) -> complex:
    """<psi| sigma_p |psi>.

    For a single (Hermitian) string the imaginary part is numerical noise,
    below ~1e-12; it is kept so expectations of phase-carrying string
    products compose exactly.
    """
    return complex(np.vdot(state.amplitudes, _apply_pauli_raw(state.amplitudes, state.n_qubits, p)))


def _domain_axes(n_qubits: int, qubits: tuple[int, ...]):
    """Reshape helper: move `qubits` to the front axes of the (2,)*n tensor view."""
    rest = [q for q in range(n_qubits) if q not in qubits]
    return list(qubits) + rest


def extract_domain_matrix(amps: np.ndarray, n_qubits: int, qubits: tuple[int, ...]) -> np.ndarray:
    """View the state as a (2^d, 2^(n-d)) matrix with the domain qubits as rows."""
    perm = _domain_axes(n_qubits, qubits)
    tensor = amps.reshape((2,) * n_qubits).transpose(perm)
    return np.ascontiguousarray(tensor).reshape(1 << len(qubits), -1)


def restore_domain_matrix(mat: np.ndarray, n_qubits: int, qubits: tuple[int, ...]) -> np.ndarray:
    """Inverse of :func:`extract_domain_matrix`, back to a flat amplitude array."""
    perm = _domain_axes(n_qubits, qubits)
    inverse = np.argsort(perm)
    tensor = mat.reshape((2,) * n_qubits).transpose(inverse)
    return np.ascontiguousarray(tensor).reshape(-1)


def local_string_action(p: PauliString, qubits: tuple[int, ...]) -> tuple[int, np.ndarray]:
    """(flip_mask, phase vector) of `p` restricted to the ordered domain `qubits`.

    sigma_p |a> = phase[a] |a ^ flip> in the 2^d local basis (first domain
    qubit = most significant local bit).
    """
    d = len(qubits)
    positions = {q: k for k, q in enumerate(qubits)}
    flip = 0
    sign = 0
    y_count = 0
    for qubit, letter in p.support:
        if qubit not in positions:
            raise ValueError(f"{p} is not supported inside {qubits}")
        bit = 1 << (d - 1 - positions[qubit])
        if letter in ("X", "Y"):
            flip |= bit
        if letter in ("Y", "Z"):
            sign |= bit
        if letter == "Y":
            y_count += 1
    idx = np.arange(1 << d, dtype=np.int64)
    phase = (1j ** (y_count % 4)) * (1.0 - 2.0 * (np.bitwise_count(idx & sign) & 1).astype(float))
    return flip, phase


def dense_pauli_sum(terms, qubits: tuple[int, ...]) -> np.ndarray:
    """Dense 2^d x 2^d matrix of sum_k coeff_k * sigma_k on the domain `qubits`."""
    d = len(qubits)
    mat = np.zeros((1 << d, 1 << d), dtype=np.complex128)
    cols = np.arange(1 << d)
    for coeff, string in terms:
        flip, phase = local_string_action(string, qubits)
        mat[cols ^ flip, cols] += coeff * phase
    return mat


def _renormalize(amps: np.ndarray, context: str) -> np.ndarray:
    norm = np.linalg.norm(amps)
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError(f"{context}: state norm underflowed to zero")
    if abs(norm - 1.0) > DRIFT_WARN:
        warnings.warn(f"{context}: norm drifted to {norm!r} before renormalization", stacklevel=3)
    return amps / norm


def apply_pauli_rotation(state: StateVector, terms, angle: float) -> StateVector:
    """exp(-i * angle * A) |psi> with A = sum_k coeff_k * sigma_k, exact on the domain.

    The domain is the union of the term supports; the exponential is taken
    through a dense Hermitian eigendecomposition on that subspace and the
    identity elsewhere.
    """
    terms = [(float(c), s) for c, s in terms]
    if not all(np.isfinite(c) for c, _ in terms):
        raise ValueError("rotation coefficients must be finite")
    qubits = tuple(sorted({q for _, s in terms for q in s.qubits}))
    if not qubits:
        return state.copy()
    if qubits[-1] >= state.n_qubits:
        raise ValueError(f"terms act on qubit {qubits[-1]} but the state has {state.n_qubits} qubits")
    if len(qubits) > ROTATION_DOMAIN_CAP:
        raise ValueError(f"rotation domain of {len(qubits)} qubits exceeds the cap ({ROTATION_DOMAIN_CAP})")
    a_mat = dense_pauli_sum(terms, qubits)
    eigvals, eigvecs = np.linalg.eigh(a_mat)
    unitary = (eigvecs * np.exp(-1j * angle * eigvals)) @ eigvecs.conj().T
    mat = extract_domain_matrix(state.amplitudes, state.n_qubits, qubits)
    new_amps = restore_domain_matrix(unitary @ mat, state.n_qubits, qubits)
    return StateVector(state.n_qubits, _renormalize(new_amps, "apply_pauli_rotation"), copy=False)


def apply_diagonal_imaginary(state: StateVector, h: DiagonalHamiltonian, t: float) -> StateVector:
    """Normalized exp(-t H) |psi> for diagonal H, stabilized by the extremal-energy shift."""
    if h.n_qubits != state.n_qubits:
        raise ValueError("Hamiltonian size does not match the state")
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    energies = h.energies()
    shift = energies.min() if t >= 0 else energies.max()
    weights = np.exp(-t * (energies - shift))
    amps = state.amplitudes * weights
    norm = np.linalg.norm(amps)
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("all amplitudes underflowed in the imaginary-time weighting")
    return StateVector(state.n_qubits, amps / norm, copy=False)


def norm_distance(x: StateVector, y: StateVector) -> float:
    """l2 norm of the amplitude difference; global-phase sensitive by design."""
    if x.n_qubits != y.n_qubits:
        raise ValueError("states have different qubit counts")
    return float(np.linalg.norm(x.amplitudes - y.amplitudes))


def fidelity(x: StateVector, y: StateVector) -> float:
    """|<x|y>|^2."""
    if x.n_qubits != y.n_qubits:
        raise ValueError("states have different qubit counts")
    return float(abs(np.vdot(x.amplitudes, y.amplitudes)) ** 2)


def dump_state(state: StateVector, path) -> None:
    """Binary dump: little-endian u32 qubit count, then f64 re/im pairs per amplitude."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", state.n_qubits))
        fh.write(state.amplitudes.astype("<c16").tobytes())


def load_state(path) -> StateVector:
    with open(path, "rb") as fh:
        (n_qubits,) = struct.unpack("<I", fh.read(4))
        amps = np.frombuffer(fh.read(), dtype="<c16")
    return StateVector(n_qubits, amps.astype(np.complex128))
