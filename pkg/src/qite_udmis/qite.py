"""The unitary imaginary-time engine.

Per Hamiltonian term h[l] and iteration j, the non-unitary Trotter sub-step
exp(-tau h[l]) is emulated by a unitary exp(-i tau A[l,j]) whose generator is
expanded in Pauli strings on a fixed qubit domain. The expansion coefficients
solve the linear system

    (S + S^T)_IJ a_J = -b_I,   S_IJ = <psi| s_I s_J |psi>,
    b_I = -2 Im <psi| s_I h[l] |psi>,

built from the current state. Domains are fixed across iterations: kind "A"
uses exactly each term's support, kind "B" widens every pair-term domain to
4 qubits with two seeded random neighbors, "full" uses all qubits.

Two update modes are provided. The default, "joint", fits all of an
iteration's generators in a single least-squares projection: the union of
the domain string bases against the full step direction exp(-tau H)|psi>,
after which each term's share of the solution is applied as its own domain
exponential, keeping the product structure. Widening any domain then
strictly enlarges the fitting basis, so larger domains track the exact
evolution monotonically better. The "sequential" mode instead solves and
applies one term at a time, each system built from the partially updated
state; it is kept for comparison but its greedy per-term fits interact
through their second-order cross terms and track the exact flow less
faithfully on entangled states (widening domains can then even hurt).

Implementation notes: strings inside a domain are encoded as base-4 letter
codes, so a string product is a XOR of codes plus a phase table, and every
S entry is a gather from the 4^d expectation values Tr(rho_D s_K) of the
domain's reduced density matrix. For the real-amplitude states produced
here (real diagonal H, all-plus start) the strings with an even number of
Y letters have exactly zero right-hand side and decouple from the rest of
the normal equations, so the engine solves only the odd-Y block; the public
system builder keeps the complete basis.
"""

import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import UnitDiskGraph
from .hamiltonian import DiagonalHamiltonian, term_decomposition
from .pauli import I_POWERS, PauliString, PauliTerm, code_to_string, string_code
from .state import (
    DRIFT_WARN,
    StateVector,
    apply_pauli,
    dense_pauli_sum,
    dump_state,
    extract_domain_matrix,
    local_string_action,
    plus_state,
    restore_domain_matrix,
)

ENGINE_DOMAIN_CAP = 6
_I_POW_ARR = np.array(I_POWERS)
# i-power of the single-letter product a*b, letters coded I=0, X=1, Y=2, Z=3.
_PHASE_TAB = np.array(
    [
        [0, 0, 0, 0],
        [0, 0, 1, 3],
        [0, 3, 0, 1],
        [0, 1, 3, 0],
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class DomainSet:
    """Per-term qubit subsets, aligned with the Hamiltonian term decomposition."""

    per_term: tuple[tuple[int, ...], ...]
    size_cap: int = 4

    def __post_init__(self):
        object.__setattr__(
            self, "per_term", tuple(tuple(sorted(set(d))) for d in self.per_term)
        )
        for domain in self.per_term:
            if not domain:
                raise ValueError("every domain must be nonempty")
            if len(domain) > self.size_cap:
                raise ValueError(f"domain {domain} exceeds the size cap {self.size_cap}")


@dataclass
class QiteConfig:
    """Evolution parameters: t_max = tau * n_max.

    `update_mode` is "joint" (one least-squares fit per iteration over the
    pooled domain bases, see module docstring) or "sequential" (per-term
    fits applied one after another). `include_identity` adds the
    all-identity string to the expansion basis; it carries provably zero
    weight (only a global phase) and is off by default.
    """

    tau: float
    n_max: int
    domain_kind: str = "A"
    regularization_lambda: float = 1e-6
    rng_seed: int = 0
    record_every: int = 10
    update_mode: str = "joint"
    include_identity: bool = False

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.regularization_lambda < 0:
            raise ValueError("regularization_lambda must be >= 0")
        if self.domain_kind not in ("A", "B", "full", "custom"):
            raise ValueError(f"unknown domain_kind {self.domain_kind!r}")
        if self.update_mode not in ("joint", "sequential"):
            raise ValueError(f"unknown update_mode {self.update_mode!r}")

    @property
    def t_max(self) -> float:
        return self.tau * self.n_max


@dataclass
class SubstepSolution:
    """Real expansion coefficients of one unitary update, aligned with `basis`."""

    term_index: int
    coefficients: np.ndarray
    residual: float
    basis: tuple[PauliString, ...] | None = None

    def pairs(self) -> list[tuple[PauliString, float]]:
        if self.basis is None:
            raise ValueError("this solution carries no string basis")
        return list(zip(self.basis, (float(a) for a in self.coefficients)))


@dataclass
class Snapshot:
    """State and per-term diagnostics recorded at one iteration boundary.

    `solver_residuals` are ||(S+S^T) a + b|| of the per-term systems built
    from the iteration's starting state, `trotter_residuals` the values of
    each sub-step's minimization objective at its own fit (O(tau^2)),
    `norm_drifts` the |norm - 1| values absorbed by renormalization per
    applied update, and `joint_residual` the pooled system's residual (nan
    in sequential mode). Empty arrays at iteration 0.
    """

    iteration: int
    t: float
    state: StateVector
    solver_residuals: np.ndarray = field(default_factory=lambda: np.empty(0))
    trotter_residuals: np.ndarray = field(default_factory=lambda: np.empty(0))
    norm_drifts: np.ndarray = field(default_factory=lambda: np.empty(0))
    joint_residual: float = float("nan")


def build_domain_A(h: DiagonalHamiltonian) -> DomainSet:
    """Every domain equals its term's support: {i} for Z_i, {i, i'} for Z_i Z_i'."""
    domains = []
    for _, paulis in term_decomposition(h):
        support = sorted({q for term in paulis for q in term.string.qubits})
        domains.append(tuple(support))
    return DomainSet(tuple(domains))


def build_domain_B(h: DiagonalHamiltonian, g: UnitDiskGraph, rng_seed: int) -> DomainSet:
    """Pair-term domains widened to 4 qubits with two seeded random neighbors.

    Candidates for the extra qubits are (N(i) | N(i')) \\ {i, i'}; if fewer
    than two exist the domain keeps whatever is available (2 or 3 qubits).
    Single-Z domains stay at their supports.
    """
    if g.n_vertices != h.n_qubits:
        raise ValueError("graph size does not match the Hamiltonian")
    if set(h.quadratic_c) != set(g.edges):
        raise ValueError("graph edges do not match the Hamiltonian pair terms")
    rng = np.random.default_rng([rng_seed])
    domains = []
    for _, paulis in term_decomposition(h):
        support = sorted({q for term in paulis for q in term.string.qubits})
        if len(support) < 2:
            domains.append(tuple(support))
            continue
        i, j = support
        candidates = sorted((g.neighbors(i) | g.neighbors(j)) - {i, j})
        take = min(2, len(candidates))
        extras = rng.choice(len(candidates), size=take, replace=False) if take else []
        domains.append(tuple(sorted({i, j} | {candidates[k] for k in extras})))
    return DomainSet(tuple(domains))


def build_domain_full(h: DiagonalHamiltonian) -> DomainSet:
    """A single all-qubit domain for every term."""
    everything = tuple(range(h.n_qubits))
    n_terms = len(term_decomposition(h))
    return DomainSet((everything,) * n_terms, size_cap=max(4, h.n_qubits))


def build_domains(h: DiagonalHamiltonian, kind: str, graph: UnitDiskGraph | None = None,
                  rng_seed: int = 0) -> DomainSet:
    if kind == "A":
        return build_domain_A(h)
    if kind == "B":
        if graph is None:
            raise ValueError("domain kind B needs the underlying graph")
        return build_domain_B(h, graph, rng_seed)
    if kind == "full":
        return build_domain_full(h)
    raise ValueError(f"cannot build domains of kind {kind!r}")


class _DomainTables:
    """Flip masks and phase vectors of all 4^d strings on one qubit domain.

    String code s_K acts on local basis states as s_K |a> = phase[K, a] |a ^ flip[K]>,
    with the first domain qubit as the most significant local bit.
    """

    def __init__(self, qubits: tuple[int, ...]):
        d = len(qubits)
        if d > ENGINE_DOMAIN_CAP:
            raise ValueError(f"domain of {d} qubits exceeds the engine cap ({ENGINE_DOMAIN_CAP})")
        self.qubits = qubits
        self.d = d
        codes = np.arange(4**d, dtype=np.int64)
        flips = np.zeros_like(codes)
        signs = np.zeros_like(codes)
        y_counts = np.zeros_like(codes)
        for k in range(d):
            digit = (codes >> (2 * (d - 1 - k))) & 3
            bit = 1 << (d - 1 - k)
            flips |= bit * ((digit == 1) | (digit == 2))
            signs |= bit * ((digit == 2) | (digit == 3))
            y_counts += digit == 2
        idx = np.arange(1 << d, dtype=np.int64)
        parity = (np.bitwise_count(idx[None, :] & signs[:, None]) & 1).astype(float)
        self.flips = flips
        self.y_parity = (y_counts & 1).astype(bool)
        self.phases = _I_POW_ARR[y_counts % 4][:, None] * (1.0 - 2.0 * parity)
        self._gather_cols = idx[None, :] ^ flips[:, None]
        self._gather_rows = np.broadcast_to(idx, self._gather_cols.shape)

    def traces(self, rho: np.ndarray) -> np.ndarray:
        """Tr(rho s_K) for every string code K."""
        return (rho[self._gather_rows, self._gather_cols] * self.phases).sum(axis=1)


def _phase_powers(c1: np.ndarray, c2: np.ndarray, d: int) -> np.ndarray:
    """Power of i picked up by the code product c1 * c2 (mod 4)."""
    p = np.zeros(np.broadcast_shapes(c1.shape, c2.shape), dtype=np.int64)
    for k in range(d):
        shift = 2 * (d - 1 - k)
        p += _PHASE_TAB[(c1 >> shift) & 3, (c2 >> shift) & 3]
    return p % 4


class _BasisBlock:
    """Gather tables for one expansion basis on one domain."""

    def __init__(self, tables: _DomainTables, basis_codes: np.ndarray):
        self.tables = tables
        self.basis = basis_codes
        m = basis_codes.size
        d = tables.d
        self.K = basis_codes[:, None] ^ basis_codes[None, :]
        ipow = _I_POW_ARR[_phase_powers(basis_codes[:, None], basis_codes[None, :], d)]
        self.PR = np.ascontiguousarray(ipow.real)
        self.PI = np.ascontiguousarray(ipow.imag)
        self.flips = tables.flips[basis_codes]
        self.phases = tables.phases[basis_codes]
        cols = np.arange(1 << d, dtype=np.int64)
        rows = cols[None, :] ^ self.flips[:, None]
        if m * (1 << (2 * d)) <= 1 << 22:
            # dense string stack: A = tensordot(a, stack)
            stack = np.zeros((m, 1 << d, 1 << d), dtype=np.complex128)
            stack[np.arange(m)[:, None], rows, cols[None, :]] = self.phases
            self._stack = stack
            self._flat_idx = None
        else:
            self._stack = None
            self._flat_idx = (rows * (1 << d) + cols[None, :]).ravel()

    def gram(self, traces: np.ndarray) -> np.ndarray:
        """Re(S + S^T) = 2 Re(S) via gathers into the domain trace vector."""
        return 2.0 * (self.PR * traces.real[self.K] - self.PI * traces.imag[self.K])

    def complex_overlap(self, traces: np.ndarray) -> np.ndarray:
        """The full complex S matrix."""
        return (self.PR + 1j * self.PI) * traces[self.K]

    def generator(self, coeffs: np.ndarray) -> np.ndarray:
        """Dense Hermitian A = sum_k a_k s_k on the domain."""
        dim = 1 << self.tables.d
        if self._stack is not None:
            return np.tensordot(coeffs, self._stack, axes=1)
        vals = (coeffs[:, None] * self.phases).ravel()
        flat = np.bincount(self._flat_idx, weights=vals.real, minlength=dim * dim) + 1j * np.bincount(
            self._flat_idx, weights=vals.imag, minlength=dim * dim
        )
        return flat.reshape(dim, dim)

    def unitary(self, coeffs: np.ndarray, tau: float) -> np.ndarray:
        eigvals, eigvecs = np.linalg.eigh(self.generator(coeffs))
        return (eigvecs * np.exp(-1j * tau * eigvals)) @ eigvecs.conj().T


class _TermBlock:
    """Per-term right-hand-side tables on top of a shared basis block."""

    def __init__(self, block: _BasisBlock, paulis: list[PauliTerm], n_qubits: int):
        self.block = block
        self.qubits = block.tables.qubits
        self.paulis = paulis
        self.n_qubits = n_qubits
        h_codes = np.array(
            [string_code(term.string, self.qubits) for term in paulis], dtype=np.int64
        )
        coeffs = np.array([term.coefficient for term in paulis])
        if np.abs(coeffs.imag).max(initial=0.0) > 0:
            raise ValueError("Hamiltonian term coefficients must be real")
        self.h_coeffs = coeffs.real
        self.bK = block.basis[:, None] ^ h_codes[None, :]
        ipow = _I_POW_ARR[_phase_powers(block.basis[:, None], h_codes[None, :], block.tables.d)]
        self.bPR = np.ascontiguousarray(ipow.real)
        self.bPI = np.ascontiguousarray(ipow.imag)
        self._term_diag = None

    def rhs(self, traces: np.ndarray) -> np.ndarray:
        """b_I = -2 Im <psi| s_I h |psi>."""
        im_part = self.bPR * traces.imag[self.bK] + self.bPI * traces.real[self.bK]
        return -2.0 * (im_part @ self.h_coeffs)

    def term_diagonal(self) -> np.ndarray:
        """Eigenvalue of the (diagonal) term on every full basis index."""
        if self._term_diag is None:
            n = self.n_qubits
            idx = np.arange(1 << n, dtype=np.int64)
            diag = np.zeros(idx.size)
            for coeff, term in zip(self.h_coeffs, self.paulis):
                z = np.ones(idx.size)
                for qubit, letter in term.string.support:
                    if letter != "Z":
                        raise ValueError("term_diagonal is only defined for Z strings")
                    z = z * (1.0 - 2.0 * ((idx >> (n - 1 - qubit)) & 1))
                diag += coeff * z
            self._term_diag = diag
        return self._term_diag


def _solve_real(m_matrix: np.ndarray, b: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """Least-squares solution of (M + lam I) a = -b; residual uses the bare M."""
    if not (np.all(np.isfinite(m_matrix)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite linear system")
    if lam > 0:
        reg = m_matrix + lam * np.eye(m_matrix.shape[0])
        try:
            a = np.linalg.solve(reg, -b)
        except np.linalg.LinAlgError:
            a = np.linalg.lstsq(reg, -b, rcond=None)[0]
    else:
        a = np.linalg.lstsq(m_matrix, -b, rcond=None)[0]
    residual = float(np.linalg.norm(m_matrix @ a + b))
    return a, residual


def substep_linear_system(state: StateVector, term: list[PauliTerm], domain,
                          include_identity: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """The (S, b) system of one sub-step over the complete domain string basis.

    S_IJ = <psi| s_I s_J |psi> (complex, with product phases), b_I =
    -2 Im <psi| s_I h |psi>; the basis ordering is that of
    :func:`qite_udmis.pauli.enumerate_basis`, optionally preceded by the
    identity string.
    """
    qubits = tuple(sorted(set(domain)))
    support = {q for pt in term for q in pt.string.qubits}
    if not support <= set(qubits):
        raise ValueError(f"domain {qubits} does not contain the term support {sorted(support)}")
    if qubits[-1] >= state.n_qubits:
        raise ValueError("domain exceeds the state size")
    tables = _DomainTables(qubits)
    start = 0 if include_identity else 1
    basis = np.arange(start, 4 ** len(qubits), dtype=np.int64)
    block = _BasisBlock(tables, basis)
    tblock = _TermBlock(block, list(term), state.n_qubits)
    mat = extract_domain_matrix(state.amplitudes, state.n_qubits, qubits)
    rho = mat @ mat.conj().T
    traces = tables.traces(rho)
    return block.complex_overlap(traces), tblock.rhs(traces)


def solve_substep(s_matrix: np.ndarray, b_vector: np.ndarray, lam: float = 1e-6,
                  basis: tuple[PauliString, ...] | None = None,
                  term_index: int = 0) -> SubstepSolution:
    """Solve (Re(S + S^T) + lam I) a = -b by least squares.

    Returns the real coefficients and the residual ||Re(S + S^T) a + b||
    of the unregularized system; lam = 0 gives the minimum-norm solution.
    """
    s_matrix = np.asarray(s_matrix)
    b = np.asarray(b_vector, dtype=float)
    m_matrix = np.real(s_matrix + s_matrix.T)
    a, residual = _solve_real(m_matrix, b, lam)
    return SubstepSolution(term_index, a, residual, basis)


def _engine_basis(tables: _DomainTables, include_identity: bool) -> np.ndarray:
    """Expansion codes that can carry weight for real-amplitude states (odd-Y strings)."""
    codes = np.nonzero(tables.y_parity)[0].astype(np.int64)
    if include_identity:
        codes = np.concatenate(([0], codes))
    return codes


class _PooledSystem:
    """Joint-mode machinery: the union of all domain bases on the full register.

    Strings are deduplicated across domains; each string is owned by the
    first term whose domain contains it, and each term applies the dense
    exponential of its owned share of the fitted generator on its own
    domain.
    """

    MAX_CACHE_ENTRIES = 1 << 25  # cap on strings x amplitudes gather tables

    def __init__(self, domains: DomainSet, n_qubits: int, include_identity: bool):
        seen: dict[PauliString, int] = {}
        for term_index, domain in enumerate(domains.per_term):
            d = len(domain)
            for code in range(0 if include_identity else 1, 4**d):
                string = code_to_string(code, domain)
                wanted = string.y_count() % 2 == 1 or (include_identity and code == 0)
                if wanted and string not in seen:
                    seen[string] = term_index
        self.strings = list(seen)
        self.owners = np.array([seen[s] for s in self.strings], dtype=np.int64)
        m = len(self.strings)
        dim = 1 << n_qubits
        if m * dim > self.MAX_CACHE_ENTRIES:
            raise ValueError(
                f"pooled basis of {m} strings on {n_qubits} qubits exceeds the memory cap"
            )
        # state-independent gather tables: sigma_k psi = phases[k] * psi[src[k]]
        idx = np.arange(dim, dtype=np.int64)
        src = np.empty((m, dim), dtype=np.int64)
        phases = np.empty((m, dim), dtype=np.complex128)
        for k, string in enumerate(self.strings):
            flip = sign = y_count = 0
            for qubit, letter in string.support:
                bit = 1 << (n_qubits - 1 - qubit)
                if letter in ("X", "Y"):
                    flip |= bit
                if letter in ("Y", "Z"):
                    sign |= bit
                if letter == "Y":
                    y_count += 1
            src[k] = idx ^ flip
            parity = (np.bitwise_count(src[k] & sign) & 1).astype(float)
            phases[k] = (1j ** (y_count % 4)) * (1.0 - 2.0 * parity)
        self._src = src
        self._phases = phases
        # per-term application data: local actions of the owned strings
        self.per_term_apply: list[list[tuple[int, int, np.ndarray]]] = [
            [] for _ in domains.per_term
        ]
        for k, string in enumerate(self.strings):
            domain = domains.per_term[self.owners[k]]
            flip, phase = local_string_action(string, domain)
            self.per_term_apply[self.owners[k]].append((k, flip, phase))

    def system(self, psi: np.ndarray, energies_eff: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        applied = self._phases * psi[self._src]
        s_matrix = np.conj(applied) @ applied.T
        b = -2.0 * np.imag(np.conj(applied) @ (energies_eff * psi))
        return np.real(s_matrix + s_matrix.T), b

    def term_generator(self, term_index: int, coeffs: np.ndarray, d: int) -> np.ndarray | None:
        entries = self.per_term_apply[term_index]
        if not entries:
            return None
        gen = np.zeros((1 << d, 1 << d), dtype=np.complex128)
        cols = np.arange(1 << d)
        for k, flip, phase in entries:
            gen[cols ^ flip, cols] += coeffs[k] * phase
        return gen


def qite_evolve(h: DiagonalHamiltonian, domains: DomainSet,
                cfg: QiteConfig) -> tuple[StateVector, list[Snapshot]]:
    """Run the full evolution from the plus state.

    Joint mode (default): per iteration, fit all term generators at once by
    projecting the full step direction onto the pooled domain bases, then
    apply each term's share as a domain exponential, in decomposition
    order. Sequential mode: per term, build the system from the current
    (partially updated) state, solve, apply, then move to the next term.

    Snapshots (state plus per-term diagnostics) are recorded at iteration
    0, every `record_every` iterations, and at the final iteration.
    Deterministic: no randomness enters the evolution.
    """
    terms = term_decomposition(h)
    if len(domains.per_term) != len(terms):
        raise ValueError(
            f"domain count {len(domains.per_term)} does not match term count {len(terms)}"
        )
    n = h.n_qubits
    tables_cache: dict[tuple[int, ...], _DomainTables] = {}
    block_cache: dict[tuple[int, ...], _BasisBlock] = {}
    term_blocks = []
    for (label, paulis), domain in zip(terms, domains.per_term):
        support = {q for pt in paulis for q in pt.string.qubits}
        if not support <= set(domain):
            raise ValueError(f"domain {domain} does not contain the support of term {label}")
        if domain not in tables_cache:
            tables_cache[domain] = _DomainTables(domain)
            block_cache[domain] = _BasisBlock(
                tables_cache[domain], _engine_basis(tables_cache[domain], cfg.include_identity)
            )
        term_blocks.append(_TermBlock(block_cache[domain], paulis, n))

    joint = cfg.update_mode == "joint"
    pooled = _PooledSystem(domains, n, cfg.include_identity) if joint else None
    energies_eff = (h.energies() - h.constant_a) if joint else None

    psi = plus_state(n).amplitudes.copy()
    n_terms = len(term_blocks)
    snapshots = [Snapshot(0, 0.0, StateVector(n, psi, copy=True))]
    for j in range(1, cfg.n_max + 1):
        recorded = (j % cfg.record_every == 0) or (j == cfg.n_max)
        psi_start = psi.copy() if recorded else None
        drifts = np.zeros(n_terms) if recorded else None
        solver_res = np.zeros(n_terms) if recorded else None
        trotter_res = np.zeros(n_terms) if recorded else None
        joint_residual = float("nan")

        if joint:
            m_matrix, b = pooled.system(psi, energies_eff)
            a, joint_residual = _solve_real(m_matrix, b, cfg.regularization_lambda)
            for l, tblock in enumerate(term_blocks):
                gen = pooled.term_generator(l, a, len(tblock.qubits))
                if gen is None:
                    continue
                eigvals, eigvecs = np.linalg.eigh(gen)
                unitary = (eigvecs * np.exp(-1j * cfg.tau * eigvals)) @ eigvecs.conj().T
                mat = extract_domain_matrix(psi, n, tblock.qubits)
                new_mat = unitary @ mat
                norm = np.linalg.norm(new_mat)
                drift = abs(norm - 1.0)
                if drift > DRIFT_WARN:
                    warnings.warn(f"update ({j}, {l}): norm drifted by {drift:g}", stacklevel=2)
                new_mat /= norm
                psi = restore_domain_matrix(new_mat, n, tblock.qubits)
                if recorded:
                    drifts[l] = drift
        else:
            for l, tblock in enumerate(term_blocks):
                block = tblock.block
                mat = extract_domain_matrix(psi, n, tblock.qubits)
                rho = mat @ mat.conj().T
                traces = block.tables.traces(rho)
                a, residual = _solve_real(
                    block.gram(traces), tblock.rhs(traces), cfg.regularization_lambda
                )
                new_mat = block.unitary(a, cfg.tau) @ mat
                norm = np.linalg.norm(new_mat)
                drift = abs(norm - 1.0)
                if drift > DRIFT_WARN:
                    warnings.warn(f"substep ({j}, {l}): norm drifted by {drift:g}", stacklevel=2)
                new_mat /= norm
                psi = restore_domain_matrix(new_mat, n, tblock.qubits)
                if recorded:
                    drifts[l] = drift

        if recorded:
            # Per-term diagnostics from the iteration's starting state: the
            # linear-system residual of each term's own fit, and the value of
            # the sub-step minimization objective at that fit (O(tau^2)).
            for l, tblock in enumerate(term_blocks):
                block = tblock.block
                mat = extract_domain_matrix(psi_start, n, tblock.qubits)
                rho = mat @ mat.conj().T
                traces = block.tables.traces(rho)
                a_l, solver_res[l] = _solve_real(
                    block.gram(traces), tblock.rhs(traces), cfg.regularization_lambda
                )
                moved = psi_start - 1j * cfg.tau * restore_domain_matrix(
                    block.generator(a_l) @ mat, n, tblock.qubits
                )
                weighted = np.exp(-cfg.tau * tblock.term_diagonal()) * psi_start
                weighted /= np.linalg.norm(weighted)
                trotter_res[l] = float(np.linalg.norm(weighted - moved))
            snapshots.append(
                Snapshot(j, j * cfg.tau, StateVector(n, psi, copy=True),
                         solver_res, trotter_res, drifts, joint_residual)
            )
    return StateVector(n, psi, copy=True), snapshots


def _exact_substep_state(state_before: StateVector, term: list[PauliTerm], tau: float) -> StateVector:
    """normalize(exp(-tau h) |psi>) via a dense Hermitian exponential on the term support."""
    qubits = tuple(sorted({q for pt in term for q in pt.string.qubits}))
    h_mat = dense_pauli_sum([(pt.coefficient, pt.string) for pt in term], qubits)
    eigvals, eigvecs = np.linalg.eigh(h_mat)
    evolver = (eigvecs * np.exp(-tau * (eigvals - eigvals.min()))) @ eigvecs.conj().T
    mat = extract_domain_matrix(state_before.amplitudes, state_before.n_qubits, qubits)
    evolved = restore_domain_matrix(evolver @ mat, state_before.n_qubits, qubits)
    return StateVector(state_before.n_qubits, evolved)


def substep_residual(state_before: StateVector, term: list[PauliTerm],
                     solution: SubstepSolution, tau: float,
                     h_term_applied: StateVector | None = None) -> float:
    """The sub-step minimization objective at the solved coefficients.

    ||normalize(exp(-tau h) |psi>) - (1 - i tau A) |psi>|| with A built from
    the solution coefficients; O(tau^2) for a consistent solution, so the
    value shrinks about fourfold when tau halves. The exactly evolved state
    may be passed in as `h_term_applied` to avoid recomputation.
    """
    if solution.basis is None:
        raise ValueError("solution must carry its string basis")
    if h_term_applied is None:
        h_term_applied = _exact_substep_state(state_before, term, tau)
    moved = state_before.amplitudes.copy()
    for string, coeff in solution.pairs():
        if coeff:
            moved -= (1j * tau * coeff) * apply_pauli(state_before, string).amplitudes
    return float(np.linalg.norm(h_term_applied.amplitudes - moved))


def write_trace_csv(snapshots: list[Snapshot], path, dump_dir=None) -> None:
    """Per-substep diagnostics CSV: iteration, t, term_index, residual, norm_drift.

    With `dump_dir` set, each snapshot's state is also written there as
    ``state-<iteration>.bin`` in the binary amplitude format.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,t,term_index,residual,norm_drift\n")
        for snap in snapshots:
            for l in range(snap.solver_residuals.size):
                fh.write(
                    f"{snap.iteration},{snap.t:.12g},{l},"
                    f"{snap.solver_residuals[l]:.12g},{snap.norm_drifts[l]:.12g}\n"
                )
    if dump_dir is not None:
        os.makedirs(dump_dir, exist_ok=True)
        for snap in snapshots:
            dump_state(snap.state, os.path.join(dump_dir, f"state-{snap.iteration}.bin"))
