"""Diagonal optimization Hamiltonians: H = a + sum_i b_i Z_i + sum_(i,i') c_ii' Z_i Z_i'.

Covers the generic two-body diagonal form, the independent-set encoding
-sum n_i + u * sum_edges n_i n_j with n_i = (1 - Z_i)/2, exact spectrum
extraction with degeneracies, and the split into single-Z and edge terms
used by the evolution engine.
"""

import warnings

import numpy as np

from .graph import Bits, UnitDiskGraph, index_to_bits
from .pauli import PauliString, PauliTerm, single

SPECTRUM_CAP = 24
DEGENERACY_TOL = 1e-9
_CHUNK = 1 << 20


class DiagonalHamiltonian:
    """Computational-basis-diagonal Hamiltonian; immutable after construction."""

    __slots__ = ("n_qubits", "constant_a", "linear_b", "quadratic_c", "_energy_table")

    def __init__(self, n_qubits: int, constant_a: float = 0.0, linear_b=None, quadratic_c=None):
        if n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        b = np.zeros(n_qubits) if linear_b is None else np.asarray(linear_b, dtype=float).copy()
        if b.shape != (n_qubits,):
            raise ValueError(f"linear_b must have shape ({n_qubits},)")
        c = {}
        for (i, j), value in (quadratic_c or {}).items():
            if i == j or not (0 <= i < n_qubits and 0 <= j < n_qubits):
                raise ValueError(f"bad qubit pair ({i}, {j})")
            key = (min(i, j), max(i, j))
            if key in c:
                raise ValueError(f"duplicate pair coefficient for {key}")
            c[key] = float(value)
        values = np.concatenate(([constant_a], b, list(c.values()) or [0.0]))
        if not np.all(np.isfinite(values)):
            raise ValueError("all coefficients must be finite")
        b.setflags(write=False)
        object.__setattr__(self, "n_qubits", int(n_qubits))
        object.__setattr__(self, "constant_a", float(constant_a))
        object.__setattr__(self, "linear_b", b)
        object.__setattr__(self, "quadratic_c", dict(sorted(c.items())))
        object.__setattr__(self, "_energy_table", None)

    def __setattr__(self, name, value):
        raise AttributeError("DiagonalHamiltonian is immutable")

    def __repr__(self):
        return f"DiagonalHamiltonian(n={self.n_qubits}, pairs={len(self.quadratic_c)})"

    def energies(self) -> np.ndarray:
        """Energy of every computational basis state, indexed by basis index (cached)."""
        if self._energy_table is None:
            n = self.n_qubits
            if n > SPECTRUM_CAP:
                raise ValueError(f"n={n} exceeds the 2^N enumeration cap ({SPECTRUM_CAP})")
            table = np.empty(1 << n)
            for start in range(0, 1 << n, _CHUNK):
                idx = np.arange(start, min(start + _CHUNK, 1 << n), dtype=np.int64)
                z = [1.0 - 2.0 * ((idx >> (n - 1 - q)) & 1) for q in range(n)]
                e = np.full(idx.size, self.constant_a)
                for q in range(n):
                    if self.linear_b[q]:
                        e += self.linear_b[q] * z[q]
                for (i, j), c in self.quadratic_c.items():
                    e += c * z[i] * z[j]
                table[start : start + idx.size] = e
            table.setflags(write=False)
            object.__setattr__(self, "_energy_table", table)
        return self._energy_table


def from_udmis(g: UnitDiskGraph, u: float = 1.35) -> DiagonalHamiltonian:
    """Encode independent-set maximization on `g` as a diagonal Hamiltonian.

    E(S) = -|S| + u * (# edges internal to S); u > 1 guarantees that every
    ground state is an independent set.
    """
    if u <= 0:
        raise ValueError("u must be positive")
    if u <= 1:
        warnings.warn(f"u={u} <= 1: ground states may not be independent sets", stacklevel=2)
    n = g.n_vertices
    a = -n / 2 + u * len(g.edges) / 4
    b = np.full(n, 0.5)
    for i in range(n):
        b[i] -= u * g.degree(i) / 4
    c = {edge: u / 4 for edge in g.sorted_edges()}
    return DiagonalHamiltonian(n, a, b, c)


def energy(h: DiagonalHamiltonian, s: Bits) -> float:
    """Energy of one bitstring (Z eigenvalue +1 on bit 0, -1 on bit 1)."""
    if len(s) != h.n_qubits:
        raise ValueError(f"bitstring length {len(s)} != n_qubits {h.n_qubits}")
    z = [1.0 - 2.0 * bit for bit in s]
    e = h.constant_a + sum(h.linear_b[q] * z[q] for q in range(h.n_qubits))
    e += sum(c * z[i] * z[j] for (i, j), c in h.quadratic_c.items())
    return float(e)


class SpectrumLevel:
    """One eigenvalue with its degeneracy; `indices` are the ascending basis indices."""

    __slots__ = ("energy", "degeneracy", "indices", "n_qubits")

    def __init__(self, energy: float, indices: np.ndarray, n_qubits: int):
        self.energy = float(energy)
        self.indices = np.sort(np.asarray(indices, dtype=np.int64))
        self.degeneracy = int(self.indices.size)
        self.n_qubits = n_qubits

    @property
    def representatives(self) -> list[Bits]:
        return [index_to_bits(int(i), self.n_qubits) for i in self.indices]

    def __repr__(self):
        return f"SpectrumLevel(E={self.energy:g}, g={self.degeneracy})"


class Spectrum:
    """Sorted energy levels of a diagonal Hamiltonian, grouped within 1e-9."""

    __slots__ = ("n_qubits", "levels")

    def __init__(self, n_qubits: int, levels: list[SpectrumLevel]):
        self.n_qubits = n_qubits
        self.levels = levels

    @property
    def dimension(self) -> int:
        return 1 << self.n_qubits

    @property
    def ground_energy(self) -> float:
        return self.levels[0].energy

    @property
    def ground_degeneracy(self) -> int:
        return self.levels[0].degeneracy

    @property
    def gap(self) -> float:
        """E1 - E0; zero for a fully degenerate spectrum."""
        if len(self.levels) < 2:
            return 0.0
        return self.levels[1].energy - self.levels[0].energy

    def acceptable_count(self, delta_e: float) -> int:
        """Number of basis states with E <= E0 + delta_e (threshold states count as acceptable)."""
        cut = self.ground_energy + delta_e + DEGENERACY_TOL
        return sum(lv.degeneracy for lv in self.levels if lv.energy <= cut)

    def failing_indices(self, delta_e: float) -> np.ndarray:
        """Basis indices with E > E0 + delta_e (strict, with 1e-9 comparison slack)."""
        cut = self.ground_energy + delta_e + DEGENERACY_TOL
        failing = [lv.indices for lv in self.levels if lv.energy > cut]
        if not failing:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(failing)

    def level_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(energies, degeneracies) as aligned arrays."""
        e = np.array([lv.energy for lv in self.levels])
        d = np.array([lv.degeneracy for lv in self.levels], dtype=np.int64)
        return e, d


def spectrum(h: DiagonalHamiltonian) -> Spectrum:
    """Full 2^N enumeration grouped into levels (equality tolerance 1e-9)."""
    energies = h.energies()
    order = np.argsort(energies, kind="stable")
    sorted_e = energies[order]
    # Split wherever consecutive sorted energies differ by more than the tolerance.
    breaks = np.nonzero(np.diff(sorted_e) > DEGENERACY_TOL)[0] + 1
    levels = []
    for chunk in np.split(np.arange(sorted_e.size), breaks):
        indices = order[chunk]
        levels.append(SpectrumLevel(float(sorted_e[chunk[0]]), indices, h.n_qubits))
    return Spectrum(h.n_qubits, levels)


def term_decomposition(h: DiagonalHamiltonian) -> list[tuple[str, list[PauliTerm]]]:
    """Split H (minus its constant) into one term per qubit then one per pair.

    Single-Z terms come first in qubit order, then pair terms in
    lexicographic edge order. The constant shifts every energy equally and
    is deliberately left out of the evolved terms.
    """
    terms: list[tuple[str, list[PauliTerm]]] = []
    for q in range(h.n_qubits):
        s = single(q, "Z")
        terms.append((str(s), [PauliTerm(complex(h.linear_b[q]), s)]))
    for (i, j), c in h.quadratic_c.items():
        s = PauliString(((i, "Z"), (j, "Z")))
        terms.append((str(s), [PauliTerm(complex(c), s)]))
    return terms
