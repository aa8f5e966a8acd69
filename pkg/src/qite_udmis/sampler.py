"""Computational-basis measurement simulation and the probabilistic solver.

The full procedure: evolve the plus state with the unitary engine, draw M
shots from the final distribution, evaluate each outcome's energy
classically, keep the minimum. The evolution itself is noiseless and
deterministic; all randomness lives in the measurement seeds.
"""

import json
from dataclasses import dataclass

import numpy as np

from .analysis import FailureSpec
from .graph import Bits, bits_to_index, index_to_bits
from .hamiltonian import DEGENERACY_TOL, DiagonalHamiltonian
from .qite import DomainSet, QiteConfig, qite_evolve
from .state import StateVector


@dataclass
class SolveResult:
    """Best shot of one solver run; `succeeded` is judged against a FailureSpec."""

    best_bitstring: Bits
    best_energy: float
    all_shot_energies: list[float]
    succeeded: bool
    rng_seed: int

    def to_json(self) -> str:
        return json.dumps({
            "seed": self.rng_seed,
            "best_energy": self.best_energy,
            "best_bitstring": "".join(str(b) for b in self.best_bitstring),
            "success": self.succeeded,
        })


def derive_seed(master_seed: int, *indices: int) -> list[int]:
    """Documented seed-splitting rule: child streams use [master_seed, *indices]."""
    return [int(master_seed), *[int(i) for i in indices]]


def measure_shots(state: StateVector, m_shots: int, rng_seed) -> list[Bits]:
    """M i.i.d. computational-basis draws via inverse CDF over |amplitude|^2."""
    if m_shots < 1:
        raise ValueError("need at least one shot")
    probs = state.probabilities()
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    rng = np.random.default_rng(rng_seed)
    draws = np.searchsorted(cdf, rng.random(m_shots), side="right")
    return [index_to_bits(int(i), state.n_qubits) for i in draws]


def _best_shot(energies_table: np.ndarray, shots: list[Bits]) -> tuple[Bits, float, list[float]]:
    shot_energies = [float(energies_table[bits_to_index(s)]) for s in shots]
    best = int(np.argmin(shot_energies))  # ties: first occurrence in shot order
    return shots[best], shot_energies[best], shot_energies


def solve(h: DiagonalHamiltonian, domains: DomainSet, cfg: QiteConfig, m_shots: int,
          failure_spec: FailureSpec | None = None,
          measure_seed=None) -> SolveResult:
    """Evolve, measure M shots, return the lowest-energy outcome.

    Measurement randomness comes from `measure_seed` (default: derived from
    cfg.rng_seed); success means best energy <= E0 + delta_e, with delta_e = 0
    when no FailureSpec is given.
    """
    final, _ = qite_evolve(h, domains, cfg)
    if measure_seed is None:
        measure_seed = derive_seed(cfg.rng_seed, 0)
    shots = measure_shots(final, m_shots, measure_seed)
    table = h.energies()
    best_bits, best_energy, shot_energies = _best_shot(table, shots)
    delta_e = failure_spec.delta_e if failure_spec else 0.0
    e0 = float(table.min())
    return SolveResult(
        best_bitstring=best_bits,
        best_energy=best_energy,
        all_shot_energies=shot_energies,
        succeeded=best_energy <= e0 + delta_e + DEGENERACY_TOL,
        rng_seed=int(cfg.rng_seed),
    )


def failure_rate_empirical(h: DiagonalHamiltonian, domains: DomainSet, cfg: QiteConfig,
                           spec: FailureSpec, repetitions: int,
                           final_state: StateVector | None = None) -> float:
    """Fraction of repeated M-shot runs whose best energy misses E0 + delta_e.

    The evolution is deterministic, so it is computed once and only the
    measurement seeds vary (repetition k draws from [rng_seed, 1, k]).
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if final_state is None:
        final_state, _ = qite_evolve(h, domains, cfg)
    table = h.energies()
    cutoff = float(table.min()) + spec.delta_e + DEGENERACY_TOL
    probs = final_state.probabilities()
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    failures = 0
    for rep in range(repetitions):
        rng = np.random.default_rng(derive_seed(cfg.rng_seed, 1, rep))
        draws = np.searchsorted(cdf, rng.random(spec.shots_m), side="right")
        if table[draws].min() > cutoff:
            failures += 1
    return failures / repetitions


def exact_failure_prob(h: DiagonalHamiltonian, state: StateVector, delta_e: float) -> float:
    """Single-shot failure probability of `state` computed from exact amplitudes."""
    return float(np.sum(state.probabilities()[h.energies() > h.energies().min() + delta_e + DEGENERACY_TOL]))


def write_results_jsonl(results: list[SolveResult], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for res in results:
            fh.write(res.to_json() + "\n")
