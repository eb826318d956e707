import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import gaussian_coupling
from udwlab import dynamics, oracle, thermal
from udwlab.dynamics import MINUS, PLUS
from udwlab.errors import DivergenceError, SingularPointError
from udwlab.modespace import CouplingFunction, Dispersion, Gaussian, ModeSpace, TestFunction

SINGLE = oracle.DiscreteModes([1.3], [0.35])
G1 = TestFunction.discrete([0.3 - 0.2j])


def test_planck_density_and_kernel():
    beta, w = 2.0, 0.7
    rho = thermal.planck_density(beta, w)
    assert rho == pytest.approx(1 / (math.exp(beta * w) - 1))
    assert thermal.ThermalKernel(beta)(w) == pytest.approx(1 + 2 * rho)
    with pytest.raises(SingularPointError):
        thermal.planck_density(beta, 0.0)


def test_weights_at_zero_splitting_are_exactly_half():
    for beta in (1e-3, 1.0, 1e3):
        assert tuple(thermal.joint_thermal(beta, 0.0)) == (0.5, 0.5)


def test_gibbs_weights_favour_ground_branch():
    w = thermal.joint_thermal(1.0, 1.0)
    assert w.minus == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-15)
    assert w.plus + w.minus == pytest.approx(1.0, abs=1e-15)
    marg = thermal.thermal_qubit_marginal(1.0, 1.0, basis="z")
    sx = np.real(np.trace(marg @ oracle.SIGMA["x"]))
    assert sx == pytest.approx(w.plus - w.minus)


@settings(max_examples=50, deadline=None)
@given(b1=st.floats(0.01, 50), b2=st.floats(0.01, 50), delta=st.floats(0.01, 3))
def test_ground_weight_monotone_in_beta(b1, b2, delta):
    lo, hi = sorted((b1, b2))
    assert thermal.joint_thermal(hi, delta).minus >= thermal.joint_thermal(lo, delta).minus


@settings(max_examples=30, deadline=None)
@given(b1=st.floats(0.05, 20), b2=st.floats(0.05, 20))
def test_weyl_modulus_monotone_in_beta(b1, b2):
    lo, hi = sorted((b1, b2))
    c = gaussian_coupling(3, mass=0.5, lam=0.4)
    g = TestFunction.radial(lambda k: 0.6 * np.exp(-k**2 / 2))
    assert abs(thermal.kms_weyl(c, hi, PLUS, g)) >= abs(thermal.kms_weyl(c, lo, PLUS, g)) - 1e-14


@pytest.mark.parametrize("beta", [0.3, 1.0, 4.0])
def test_branch_kms_against_single_mode_gibbs(beta):
    system = oracle.build_hamiltonian(SINGLE, 0.0, 80)
    g_vals = np.array([0.3 - 0.2j])
    for branch in (PLUS, MINUS):
        proj = 0.5 * (np.eye(2) + branch * oracle.SIGMA["x"])
        num = oracle.expectation(system, oracle.Thermal(beta), oracle.WeylDisplacement(g_vals, proj))
        den = oracle.expectation(system, oracle.Thermal(beta),
                                 oracle.WeylDisplacement(np.zeros(1), proj))
        assert thermal.kms_weyl(SINGLE, beta, branch, G1) == pytest.approx(num / den, abs=1e-10)


def test_free_kms_value():
    beta = 0.8
    expected = math.exp(-0.5 * abs(0.3 - 0.2j) ** 2 / math.tanh(beta * 1.3 / 2))
    assert thermal.kms_weyl(SINGLE, beta, None, G1) == pytest.approx(expected, rel=1e-14)


def test_zero_temperature_limit_reaches_ground_formula():
    lim = thermal.zero_temperature_limit(SINGLE, MINUS, G1, 40.0)
    assert lim.converged
    assert lim.value == pytest.approx(thermal.ground_weyl(SINGLE, MINUS, G1), abs=1e-8)
    far = thermal.zero_temperature_limit(SINGLE, MINUS, G1, 0.1)
    assert not far.converged


def test_ground_weyl_closed_form():
    alpha = 0.35 / 1.3
    g = 0.3 - 0.2j
    expected = math.exp(-0.5 * abs(g) ** 2) * np.exp(-2j * PLUS * (alpha * g).real)
    assert thermal.ground_weyl(SINGLE, PLUS, G1) == pytest.approx(expected, abs=1e-15)


def test_kms_pairing_diverges_in_one_dimension():
    c = CouplingFunction(ModeSpace(1, Dispersion.massless()), Gaussian(1.0), 0.5)
    g = TestFunction.radial(lambda k: np.exp(-k**2))
    with pytest.raises(DivergenceError) as info:
        thermal.kms_weyl(c, 1.0, PLUS, g)
    assert "coth" in str(info.value)


def test_beta_sweep_rows():
    rows = thermal.beta_sweep(SINGLE, [0.5, 2.0], 0.3, G1)
    assert [r[0] for r in rows] == [0.5, 2.0]
    joint = dynamics.state_expectation(dynamics.JointThermal(2.0, 0.3),
                                       dynamics.WeylMatrix.weyl(G1), SINGLE)
    assert complex(rows[1][3], rows[1][4]) == pytest.approx(joint)
    assert rows[1][1] + rows[1][2] == pytest.approx(1.0)
