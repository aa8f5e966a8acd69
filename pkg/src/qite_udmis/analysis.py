"""Scalar diagnostics: state distances, failure probabilities, and their bounds.

A measurement "fails" when it lands on a basis state with energy strictly
above E0 + delta_E (threshold states count as acceptable, compared with a
1e-9 slack). The exact-evolution failure probability admits both a direct
amplitude sum and a closed form over the spectrum, and is bounded by

    P_F <= 1 / (1 + g (d - g)^{-1} exp(2 t delta_E)),

while the unitary-engine failure probability can differ from it by at most
eps * sqrt(1 - eps^2 / 4) when the two states are eps-close in norm.
"""

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import DEGENERACY_TOL, DiagonalHamiltonian, Spectrum
from .ite import ite_state
from .qite import QiteConfig, Snapshot
from .state import StateVector, fidelity, norm_distance

BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class FailureSpec:
    """Energy tolerance delta_E >= 0 and shot count M >= 1."""

    delta_e: float
    shots_m: int = 1

    def __post_init__(self):
        if self.delta_e < 0:
            raise ValueError("delta_e must be >= 0")
        if self.shots_m < 1:
            raise ValueError("shots_m must be >= 1")


@dataclass
class TrajectoryRecord:
    """One snapshot's diagnostics; epsilon_aligned is the global-phase-free variant."""

    t: float
    epsilon: float
    epsilon_bar: float
    fidelity_ite: float
    fidelity_final: float
    pf_ite: float
    pf_qite: float
    thm1_bound: float
    thm2_rhs: float
    epsilon_aligned: float = 0.0

    CSV_HEADER = "t,epsilon,epsilon_bar,fidelity_ite,fidelity_final,pf_ite,pf_qite,thm1_bound,thm2_rhs"

    def csv_row(self) -> str:
        values = (self.t, self.epsilon, self.epsilon_bar, self.fidelity_ite,
                  self.fidelity_final, self.pf_ite, self.pf_qite,
                  self.thm1_bound, self.thm2_rhs)
        return ",".join(f"{v:.12g}" for v in values)


def failure_prob(state: StateVector, spec: Spectrum, delta_e: float) -> float:
    """Probability of measuring a basis state with E > E0 + delta_e."""
    if state.n_qubits != spec.n_qubits:
        raise ValueError("state and spectrum sizes do not match")
    failing = spec.failing_indices(delta_e)
    return float(np.sum(np.abs(state.amplitudes[failing]) ** 2))


def failure_prob_ite_closed(spec: Spectrum, t: float, delta_e: float) -> float:
    """Closed-form exact-evolution failure probability sum_fail e^(-2tE) / K^2."""
    if t < 0:
        raise ValueError("t must be >= 0")
    energies, degens = spec.level_arrays()
    weights = degens * np.exp(-2.0 * t * (energies - energies[0]))
    total = weights.sum()
    if total == 0.0 or not np.isfinite(total):
        raise ValueError("imaginary-time weights underflowed")
    failing = energies > spec.ground_energy + delta_e + DEGENERACY_TOL
    return float(weights[failing].sum() / total)


def thm1_bound(t: float, delta_e: float, g: int, d: int) -> float:
    """Upper bound 1 / (1 + g (d-g)^{-1} e^{2 t delta_e}) on the exact failure probability."""
    if not 1 <= g < d:
        raise ValueError(f"need 1 <= g < d, got g={g}, d={d}")
    if t < 0 or delta_e < 0:
        raise ValueError("t and delta_e must be >= 0")
    # Evaluated with e^{-2 t dE} <= 1 so large arguments cannot overflow.
    damp = math.exp(-2.0 * t * delta_e)
    return (d - g) * damp / ((d - g) * damp + g)


def thm2_check(eps: float, pf_qite: float, pf_ite: float) -> tuple[bool, float]:
    """Check |pf_qite - pf_ite| <= eps * sqrt(1 - eps^2/4) (+1e-12 slack).

    For eps > sqrt(2) the hypothesis is void: returns (True, nan).
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps > math.sqrt(2.0):
        return True, float("nan")
    rhs = eps * math.sqrt(max(0.0, 1.0 - eps * eps / 4.0))
    return abs(pf_qite - pf_ite) <= rhs + BOUND_SLACK, rhs


def lemma1_theta_max(eps: float) -> float:
    """Largest subspace-angle difference compatible with two eps-close unit vectors."""
    if not 0 <= eps <= math.sqrt(2.0):
        raise ValueError(f"eps must lie in [0, sqrt(2)], got {eps}")
    return 2.0 * math.asin(eps / 2.0)


def aligned_distance(x: StateVector, y: StateVector) -> float:
    """Global-phase-free distance sqrt(2 - 2|<x|y>|)."""
    overlap = abs(np.vdot(x.amplitudes, y.amplitudes))
    return math.sqrt(max(0.0, 2.0 - 2.0 * overlap))


def relative_error(e0: float, ei: float) -> float:
    """100 * |E0 - Ei| / |E0|."""
    if e0 == 0:
        raise ValueError("relative error is undefined for E0 = 0")
    return 100.0 * abs(e0 - ei) / abs(e0)


def trajectory_metrics(qite_trace: list[Snapshot], h: DiagonalHamiltonian,
                       cfg: QiteConfig, spec_fail: FailureSpec,
                       spec: Spectrum | None = None) -> list[TrajectoryRecord]:
    """Per-snapshot diagnostics against the exact evolution.

    epsilon compares same-time states, epsilon_bar and fidelity_final compare
    against the exact state at t_max; failure probabilities and both bounds
    use `spec_fail.delta_e`.
    """
    if not qite_trace:
        raise ValueError("empty trace")
    from .hamiltonian import spectrum as spectrum_of

    spec = spec or spectrum_of(h)
    final_exact = ite_state(h, cfg.t_max)
    g, d = spec.ground_degeneracy, spec.dimension
    records = []
    for snap in qite_trace:
        exact_now = ite_state(h, snap.t)
        eps = norm_distance(exact_now, snap.state)
        pf_q = failure_prob(snap.state, spec, spec_fail.delta_e)
        pf_i = failure_prob_ite_closed(spec, snap.t, spec_fail.delta_e)
        _, rhs = thm2_check(eps, pf_q, pf_i)
        bound = thm1_bound(snap.t, spec_fail.delta_e, g, d) if g < d else 1.0
        records.append(TrajectoryRecord(
            t=snap.t,
            epsilon=eps,
            epsilon_bar=norm_distance(final_exact, snap.state),
            fidelity_ite=fidelity(exact_now, snap.state),
            fidelity_final=fidelity(final_exact, snap.state),
            pf_ite=pf_i,
            pf_qite=pf_q,
            thm1_bound=bound,
            thm2_rhs=rhs,
            epsilon_aligned=aligned_distance(exact_now, snap.state),
        ))
    return records


def write_trajectory_csv(records: list[TrajectoryRecord], path) -> None:
    """One row per snapshot, 12 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TrajectoryRecord.CSV_HEADER + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")
