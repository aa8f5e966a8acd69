import math

import numpy as np
import pytest
from scipy.linalg import expm

from qite_udmis.graph import UnitDiskGraph, brute_force_mis, random_unit_disk
from qite_udmis.hamiltonian import DiagonalHamiltonian, from_udmis
from qite_udmis.ite import ite_state, ite_trajectory
from qite_udmis.state import norm_distance, plus_state


def test_ite_at_zero_is_plus_state():
    h = from_udmis(UnitDiskGraph(3, edges=[(0, 1)]), 1.35)
    assert np.allclose(ite_state(h, 0.0).amplitudes, plus_state(3).amplitudes)


def test_ite_single_qubit_closed_form():
    h = DiagonalHamiltonian(1, 0.0, [1.0])
    out = ite_state(h, 1.0)
    norm = math.sqrt(math.exp(-2) + math.exp(2))
    assert out.amplitudes[0].real == pytest.approx(math.exp(-1) / norm)
    assert out.amplitudes[1].real == pytest.approx(math.exp(1) / norm)
    # frozen values of the same expression
    assert out.amplitudes[0].real == pytest.approx(0.1341126764, abs=1e-9)
    assert out.amplitudes[1].real == pytest.approx(0.9909660892, abs=1e-9)


def test_ite_long_time_limit_on_benchmark(benchmark_instance):
    g, h, spec = benchmark_instance
    out = ite_state(h, 50.0)
    _, witnesses = brute_force_mis(g)
    ground = spec.levels[0].indices
    assert len(witnesses) == 3
    assert np.allclose(np.abs(out.amplitudes[ground]), 1 / math.sqrt(3), atol=1e-12)
    others = np.delete(np.abs(out.amplitudes), ground)
    assert others.max() < 1e-3


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_ite_matches_dense_expm_oracle(t):
    for seed in range(4):
        n = 2 + seed % 3
        h = from_udmis(random_unit_disk(n, 0.6 * math.sqrt(n), seed), 1.35)
        dense = expm(-t * np.diag(h.energies())) @ plus_state(n).amplitudes
        dense /= np.linalg.norm(dense)
        assert np.allclose(ite_state(h, t).amplitudes, dense, atol=1e-9)


def test_ite_amplitudes_positive_and_ordered():
    h = from_udmis(random_unit_disk(5, 1.4, 8), 1.35)
    out = ite_state(h, 2.0)
    assert np.all(out.amplitudes.real > 0)
    assert np.all(out.amplitudes.imag == 0)
    energies = h.energies()
    order = np.argsort(energies)
    sorted_amps = out.amplitudes.real[order]
    sorted_e = energies[order]
    for k in range(len(sorted_e) - 1):
        if sorted_e[k] < sorted_e[k + 1] - 1e-12:
            assert sorted_amps[k] > sorted_amps[k + 1]


def test_ite_energy_monotone_in_t():
    h = from_udmis(random_unit_disk(6, 1.5, 4), 1.35)
    energies = h.energies()
    values = []
    for t in np.linspace(0, 5, 21):
        amps = ite_state(h, float(t)).amplitudes
        values.append(float(np.real(np.vdot(amps, energies * amps))))
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_trajectory_matches_pointwise():
    h = from_udmis(UnitDiskGraph(3, edges=[(0, 1), (1, 2)]), 1.35)
    traj = ite_trajectory(h, 0.5, 6)
    assert len(traj) == 7
    assert np.allclose(traj[0].amplitudes, plus_state(3).amplitudes)
    for k, s in enumerate(traj):
        assert norm_distance(s, ite_state(h, 0.5 * k)) < 1e-10
    # semigroup consistency
    assert norm_distance(traj[4], ite_state(h, 2.0)) < 1e-10


def test_trajectory_endpoint_matches_t_max():
    h = from_udmis(UnitDiskGraph(2, edges=[(0, 1)]), 1.35)
    traj = ite_trajectory(h, 0.01, 1000)
    assert norm_distance(traj[-1], ite_state(h, 10.0)) < 1e-10


def test_trajectory_validation():
    h = DiagonalHamiltonian(1, 0.0, [1.0])
    with pytest.raises(ValueError):
        ite_trajectory(h, 0.0, 5)
    with pytest.raises(ValueError):
        ite_state(h, -1.0)
    assert len(ite_trajectory(h, 0.1, 0)) == 1
