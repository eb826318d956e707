import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import gaussian_coupling
from udwlab import diagnostics, dynamics, oracle
from udwlab.errors import BudgetExceededError, DomainError, TruncationError
from udwlab.modespace import TestFunction


def test_dimension_and_budget():
    modes = oracle.DiscreteModes([1.0, 2.0, 3.0], [0.1, 0.1, 0.1])
    assert oracle.dimension(3, 4) == 250
    with pytest.raises(BudgetExceededError) as info:
        oracle.build_hamiltonian(modes, 0.0, 60, budget=10_000)
    assert info.value.dimension == 2 * 61**3


def test_modes_are_sorted_and_validated():
    modes = oracle.DiscreteModes([2.0, 1.0], [0.2, 0.1])
    assert modes.omega.tolist() == [1.0, 2.0]
    assert modes.coupling.real.tolist() == [0.1, 0.2]
    with pytest.raises(DomainError):
        oracle.DiscreteModes([0.0], [0.1])
    with pytest.raises(DomainError):
        oracle.qubit_vector("x")


def test_single_mode_ground_energy():
    modes = oracle.DiscreteModes([1.0], [0.3])
    system = oracle.auto_system(modes, 0.2)
    energy, _ = oracle.ground_state(system)
    assert energy == pytest.approx(-0.09 - 0.2, abs=1e-12)
    assert system.convergence and system.convergence[-1]["delta_energy"] < 1e-10


def test_sparse_path_matches_closed_form():
    modes = oracle.DiscreteModes([1.0, 1.4, 1.9, 2.6], [0.2, 0.18, 0.15, 0.1])
    system = oracle.build_hamiltonian(modes, 0.3, 9)
    assert not system.is_dense
    energy, psi = oracle.ground_state(system, check=False)
    assert energy == pytest.approx(modes.ground_energy(0.3), abs=1e-10)
    psi_t = oracle.evolve(system, psi, 1.7)
    # an eigenstate only picks up a phase
    assert abs(np.vdot(psi, psi_t)) == pytest.approx(1.0, abs=1e-9)


def test_degenerate_ground_split_by_branch(modes2):
    system = oracle.build_hamiltonian(modes2, 0.0, 10)
    branches = oracle.ground_branches(system)
    assert set(branches) == {1, -1}
    for s, psi in branches.items():
        assert oracle.expectation(system, psi, oracle.SigmaAxis("x")).real == pytest.approx(
            s, abs=1e-10)
        g = np.array([0.2, -0.3j])
        closed = dynamics.state_expectation(dynamics.JointGround(s),
                                            dynamics.WeylMatrix.weyl(TestFunction.discrete(g)),
                                            modes2)
        assert oracle.expectation(system, psi, oracle.WeylDisplacement(g)) == pytest.approx(
            closed, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(fr=st.floats(-0.6, 0.6), fi=st.floats(-0.6, 0.6), gr=st.floats(-0.6, 0.6),
       gi=st.floats(-0.6, 0.6))
def test_weyl_relation_on_low_levels(fr, fi, gr, gi):
    n_max = 40
    f, g = complex(fr, fi), complex(gr, gi)
    lhs = oracle.weyl_matrix(f, n_max) @ oracle.weyl_matrix(g, n_max)
    rhs = np.exp(-1j * (np.conj(f) * g).imag) * oracle.weyl_matrix(f + g, n_max)
    assert np.max(np.abs(lhs[:6, :6] - rhs[:6, :6])) < 1e-10


def test_weyl_vacuum_expectation_and_cache_is_read_only():
    w = oracle.weyl_matrix(0.4 - 0.3j, 30)
    assert w[0, 0] == pytest.approx(math.exp(-0.5 * 0.25), abs=1e-12)
    with pytest.raises(ValueError):
        w[0, 0] = 0


def test_truncation_check():
    modes = oracle.DiscreteModes([1.0], [0.1])
    system = oracle.build_hamiltonian(modes, 0.0, 8)
    psi = oracle.product_state(oracle.qubit_vector("g"), [oracle.coherent_vector(2.0, 8)])
    with pytest.raises(TruncationError):
        oracle.expectation(system, psi, oracle.NumberTotal())
    assert oracle.expectation(system, psi, oracle.NumberTotal(), check=False) > 3


def test_entropy_of_mixed_and_pure():
    assert oracle.entropy(np.eye(2) / 2) == pytest.approx(math.log(2))
    assert oracle.entropy(np.diag([1.0, 0.0])) == 0.0


def test_discretize_converges_to_continuum_r1():
    c = gaussian_coupling(3, mass=1.0, lam=0.8)
    modes = oracle.discretize(c, 32, oracle.GaussPanels(8.0))
    exact = diagnostics.r_integral(c, 1).value
    assert modes.metadata["r1_discrete"] == pytest.approx(exact, rel=1e-8)
    assert modes.metadata["r1_continuum"] == pytest.approx(exact)
    with pytest.raises(DomainError):
        oracle.discretize(c, 8, oracle.LinearGrid(2.0))


def test_fixture_round_trip(tmp_path, modes2):
    system = oracle.build_hamiltonian(modes2, 0.3, 8)
    data = oracle.dump_fixture(system, tmp_path / "fx.json", eigenvalues=4)
    modes, delta, n_max, eigs = oracle.load_fixture(tmp_path / "fx.json")
    assert (delta, n_max) == (0.3, 8)
    assert np.allclose(modes.coupling, modes2.coupling)
    assert eigs.tolist() == data["eigenvalues"]
    assert eigs[0] == pytest.approx(modes2.ground_energy(0.3), abs=1e-10)


def test_gauge_rotated_eigenvectors_diagonalise_complex_hamiltonian():
    modes = oracle.DiscreteModes([1.0, 1.6, 2.1], [0.25 * np.exp(0.7j), 0.2 * np.exp(-1.9j), 0.1])
    system = oracle.build_hamiltonian(modes, 0.3, 5)
    vals, vecs = system.eigh()
    H = system.hamiltonian.toarray()
    assert np.max(np.abs(H @ vecs - vecs * vals)) < 1e-12
    assert np.max(np.abs(vecs.conj().T @ vecs - np.eye(vals.size))) < 1e-12
