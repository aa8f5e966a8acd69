import math

import numpy as np
import pytest

from qite_udmis.analysis import (
    FailureSpec,
    TrajectoryRecord,
    aligned_distance,
    failure_prob,
    failure_prob_ite_closed,
    lemma1_theta_max,
    relative_error,
    thm1_bound,
    thm2_check,
    trajectory_metrics,
    write_trajectory_csv,
)
from qite_udmis.graph import random_unit_disk
from qite_udmis.hamiltonian import DiagonalHamiltonian, from_udmis, spectrum
from qite_udmis.ite import ite_state
from qite_udmis.qite import QiteConfig, build_domain_A, build_domain_full, qite_evolve
from qite_udmis.state import StateVector, basis_state, plus_state


def test_failure_prob_uniform_state(benchmark_instance):
    _, _, spec = benchmark_instance
    value = failure_prob(plus_state(6), spec, 0.0)
    assert value == pytest.approx((64 - 3) / 64)
    assert value == pytest.approx(0.953125)


def test_failure_prob_ground_state(benchmark_instance):
    _, _, spec = benchmark_instance
    ground_index = int(spec.levels[0].indices[0])
    assert failure_prob(basis_state(6, ground_index), spec, 0.0) == pytest.approx(0.0)


def test_failure_prob_size_mismatch(benchmark_instance):
    _, _, spec = benchmark_instance
    with pytest.raises(ValueError):
        failure_prob(plus_state(3), spec, 0.0)


def test_ite_failure_single_qubit_closed_form():
    spec = spectrum(DiagonalHamiltonian(1, 0.0, [1.0]))
    for t in (0.0, 0.3, 1.0, 5.0):
        assert failure_prob_ite_closed(spec, t, 0.0) == pytest.approx(1.0 / (1.0 + math.exp(4 * t)))


def test_ite_failure_closed_matches_direct():
    for seed in range(10):
        n = 3 + seed % 4
        h = from_udmis(random_unit_disk(n, 0.6 * math.sqrt(n), seed), 1.35)
        spec = spectrum(h)
        for t in (0.0, 0.5, 1.0, 5.0, 10.0):
            for delta_e in (0.0, spec.gap / 2, spec.gap):
                direct = failure_prob(ite_state(h, t), spec, delta_e)
                closed = failure_prob_ite_closed(spec, t, delta_e)
                assert closed == pytest.approx(direct, abs=1e-10)


def test_ite_failure_limits(benchmark_instance):
    _, _, spec = benchmark_instance
    # uniform weights at t=0: (d - r)/d with r the acceptable count
    r = spec.acceptable_count(0.35)
    assert failure_prob_ite_closed(spec, 0.0, 0.35) == pytest.approx((64 - r) / 64)
    assert failure_prob_ite_closed(spec, 500.0, 0.35) == pytest.approx(0.0, abs=1e-200)


def test_ite_failure_monotone_on_grid(benchmark_instance):
    _, _, spec = benchmark_instance
    grid = [failure_prob_ite_closed(spec, t, 0.35) for t in np.linspace(0, 10, 101)]
    assert all(b <= a + 1e-12 for a, b in zip(grid, grid[1:]))


def test_thm1_bound_examples():
    assert thm1_bound(0.0, 0.7, 5, 64) == pytest.approx((64 - 5) / 64)
    for t in (0.0, 1.0, 50.0):
        assert thm1_bound(t, 0.0, 1, 2) == pytest.approx(0.5)
    # g=1, 2 t dE = N ln 2: exactly (d-1)/(2d-1), which approaches 1/2 for large d
    n = 6
    d = 2**n
    t, delta_e = 1.0, n * math.log(2) / 2
    value = thm1_bound(t, delta_e, 1, d)
    assert value == pytest.approx((d - 1) / (2 * d - 1))
    assert abs(value - 0.5) <= 1 / d


def test_thm1_bound_validation():
    with pytest.raises(ValueError):
        thm1_bound(1.0, 0.1, 4, 4)
    with pytest.raises(ValueError):
        thm1_bound(1.0, 0.1, 0, 4)
    with pytest.raises(ValueError):
        thm1_bound(-1.0, 0.1, 1, 4)


def test_thm1_bound_no_overflow():
    assert thm1_bound(1e6, 10.0, 1, 64) == pytest.approx(0.0, abs=1e-300)


def test_thm1_holds_on_random_hamiltonians():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        b = rng.uniform(-1, 1, n)
        c = {(i, j): rng.uniform(-1, 1) for i in range(n) for j in range(i + 1, n)}
        spec = spectrum(DiagonalHamiltonian(n, 0.0, b, c))
        g, d = spec.ground_degeneracy, spec.dimension
        if g >= d:
            continue
        for t in (0.0, 0.1, 1.0, 5.0, 10.0):
            for delta_e in (0.0, spec.gap / 2, spec.gap):
                pf = failure_prob_ite_closed(spec, t, delta_e)
                assert pf <= thm1_bound(t, delta_e, g, d) + 1e-12


def test_thm2_examples():
    holds, rhs = thm2_check(0.0, 0.3, 0.3)
    assert holds and rhs == 0.0
    holds, rhs = thm2_check(0.0, 0.3, 0.4)
    assert not holds

    _, rhs = thm2_check(math.sqrt(2), 0.0, 1.0)
    assert rhs == pytest.approx(1.0)
    _, rhs = thm2_check(1.0, 0.0, 0.0)
    assert rhs == pytest.approx(math.sqrt(3) / 2)

    holds, rhs = thm2_check(1.5, 0.0, 1.0)  # eps > sqrt(2): hypothesis void
    assert holds and math.isnan(rhs)
    with pytest.raises(ValueError):
        thm2_check(-0.1, 0.0, 0.0)


def test_lemma1_theta_max():
    assert lemma1_theta_max(0.0) == 0.0
    assert lemma1_theta_max(math.sqrt(2)) == pytest.approx(math.pi / 2)
    assert lemma1_theta_max(1.0) == pytest.approx(math.pi / 3)
    with pytest.raises(ValueError):
        lemma1_theta_max(1.5)
    with pytest.raises(ValueError):
        lemma1_theta_max(-0.01)


def test_relative_error_examples():
    assert relative_error(-2.0, -2.0) == 0.0
    assert relative_error(-2.0, -1.65) == pytest.approx(17.5)
    assert relative_error(-3.0, -2.65) == pytest.approx(11.67, abs=0.01)
    with pytest.raises(ValueError):
        relative_error(0.0, 1.0)


def test_aligned_distance_ignores_global_phase():
    x = basis_state(1, 0)
    y = StateVector(1, [-1.0, 0.0])
    assert aligned_distance(x, y) == pytest.approx(0.0, abs=1e-12)
    z = basis_state(1, 1)
    assert aligned_distance(x, z) == pytest.approx(math.sqrt(2))


def test_trajectory_metrics_initial_row(benchmark_instance):
    _, h, spec = benchmark_instance
    cfg = QiteConfig(tau=0.01, n_max=20, record_every=10)
    _, trace = qite_evolve(h, build_domain_A(h), cfg)
    records = trajectory_metrics(trace, h, cfg, FailureSpec(0.35), spec)
    first = records[0]
    assert first.t == 0.0
    assert first.epsilon == pytest.approx(0.0, abs=1e-12)
    assert first.fidelity_ite == pytest.approx(1.0)
    assert first.pf_qite == pytest.approx(first.pf_ite)
    assert len(records) == len(trace)


def test_trajectory_metrics_full_domain_small_eps():
    g = random_unit_disk(4, 1.2, 13)
    h = from_udmis(g, 1.35)
    cfg = QiteConfig(tau=0.01, n_max=100, record_every=20)
    _, trace = qite_evolve(h, build_domain_full(h), cfg)
    records = trajectory_metrics(trace, h, cfg, FailureSpec(0.0))
    assert all(rec.epsilon <= 0.05 for rec in records)
    assert all(rec.t <= 1.0 + 1e-12 for rec in records)


def test_trajectory_metrics_benchmark_plateau(benchmark_instance):
    _, h, spec = benchmark_instance
    cfg = QiteConfig(tau=0.01, n_max=100, record_every=10)
    _, trace = qite_evolve(h, build_domain_A(h), cfg)
    records = trajectory_metrics(trace, h, cfg, FailureSpec(0.35), spec)
    eps = [rec.epsilon for rec in records]
    assert eps[1] > eps[0]           # rises from zero
    assert max(eps) < math.sqrt(2)   # stays below sqrt(2)
    for rec in records:
        assert 0 <= rec.pf_qite <= 1 + 1e-12
        assert 0 <= rec.epsilon <= 2
        holds, _ = thm2_check(rec.epsilon, rec.pf_qite, rec.pf_ite)
        assert holds


def test_trajectory_csv_schema(tmp_path, benchmark_instance):
    _, h, spec = benchmark_instance
    cfg = QiteConfig(tau=0.01, n_max=10, record_every=5)
    _, trace = qite_evolve(h, build_domain_A(h), cfg)
    records = trajectory_metrics(trace, h, cfg, FailureSpec(0.35), spec)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,epsilon,epsilon_bar,fidelity_ite,fidelity_final,pf_ite,pf_qite,thm1_bound,thm2_rhs"
    assert len(lines) == 1 + len(records)
    assert len(lines[1].split(",")) == 9


def test_failure_spec_validation():
    with pytest.raises(ValueError):
        FailureSpec(-0.1)
    with pytest.raises(ValueError):
        FailureSpec(0.1, 0)
    spec = FailureSpec(0.35, 12)
    assert spec.delta_e == 0.35 and spec.shots_m == 12
