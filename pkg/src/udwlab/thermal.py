"""Finite-temperature (KMS) states of the gapless model.

The branch KMS state of ``H_s`` is a thermal state displaced by
``-s lambda F / omega``:
``<W(g)> = exp(-<g, coth(beta omega / 2) g> / 2) exp(-2 i s Re<lambda F/omega, g>)``.
The joint state mixes the two branches with the Gibbs weights of
``Delta sigma_x``.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from . import dynamics
from .diagnostics import fit_ir_exponent
from .errors import DivergenceError, InconclusiveError, SingularPointError


@dataclass(frozen=True)
class ThermalKernel:
    """``K(k) = coth(beta omega(k) / 2)`` (always >= 1)."""

    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def __call__(self, omega):
        return dynamics.thermal_kernel(self.beta, np.asarray(omega, dtype=float))

    def occupation(self, omega):
        return planck_density(self.beta, omega)


def planck_density(beta, omega):
    """Bose occupation ``1 / (exp(beta omega) - 1)``; note ``1 + 2 rho = coth(beta omega / 2)``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise SingularPointError("Planck density is infrared-singular at omega = 0")
    out = 1.0 / np.expm1(beta * w)
    return float(out) if out.ndim == 0 else out


class ThermalWeights(NamedTuple):
    plus: float
    minus: float


def joint_thermal(beta, delta):
    """Branch weights ``(w_+, w_-)`` of the joint KMS state.

    They are the Gibbs weights of ``Delta sigma_x``:
    ``w_+ = 1 / (1 + e^{2 beta Delta})`` and ``w_- = 1 / (1 + e^{-2 beta Delta})``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    return ThermalWeights(*dynamics.joint_weights(beta, delta))


def thermal_qubit_marginal(beta, delta, basis="pm"):
    """Qubit marginal ``diag(w_+, w_-)`` of the joint KMS state."""
    w = joint_thermal(beta, delta)
    rho = np.diag([w.plus, w.minus]).astype(complex)
    if basis == "z":
        return dynamics.Z_TO_PM.conj().T @ rho @ dynamics.Z_TO_PM
    return rho


def _ir_pairing_check(space, density, name):
    """Raise if ``k^(n-1) |density|`` is not integrable at ``k = 0``."""
    profile = getattr(space, "profile", None)
    if profile is None or not space.is_massless or profile.domain[0] > 0:
        return
    n = space.n

    def h(k):
        return k ** (n - 1) * np.abs(density(space.points(k)))

    top = min(1.0, profile.scale)
    if math.isfinite(profile.support_end):
        top = min(top, profile.support_end / 2)
    try:
        fit = fit_ir_exponent(h, top)
    except InconclusiveError as exc:
        raise InconclusiveError(f"IR behaviour of pairing {name} is inconclusive",
                                exc.diagnostics) from exc
    if fit.diverges():
        raise DivergenceError(f"pairing {name} diverges at the IR end (exponent {fit.exponent:.3f})",
                              end="IR", exponent=fit.exponent)


def kms_weyl(space, beta, branch, g):
    """``<W(g)>`` in the branch KMS state (``branch`` = +1, -1 or ``None`` for free field)."""
    if g.is_zero:
        return 1.0 + 0j
    return complex(dynamics.field_weyl(space, dynamics.Kms(beta, branch), g))


def check_kms_pairings(space, beta, branch, g):
    """Certify IR convergence of the pairings entering a branch KMS expectation."""
    if g.is_zero:
        return
    _ir_pairing_check(space, lambda p: dynamics.thermal_kernel(beta, p.omega) * np.abs(g(p)) ** 2,
                      "<g, coth(beta omega/2) g>")
    if branch is not None and space.lam != 0:
        _ir_pairing_check(space, lambda p: p.coupling / p.omega * g(p), "<lambda F/omega, g>")


def ground_weyl(space, branch, g):
    """Ground-state value ``exp(-|g|^2/2) exp(-2 i branch Re<lambda F/omega, g>)``."""
    return complex(dynamics.state_expectation(dynamics.JointGround(branch),
                                              dynamics.WeylMatrix.weyl(g), space))


@dataclass(frozen=True)
class ZeroTemperatureLimit:
    value: complex
    ground: complex
    betas: tuple
    spread: float
    converged: bool


def zero_temperature_limit(space, branch, g, beta, tol=1e-8):
    """Evaluate the branch KMS state at ``beta, 2 beta, 4 beta`` and compare.

    ``converged`` is true when the three values agree within ``tol`` and the
    largest-beta value is within ``tol`` of the ground-state formula.
    """
    betas = (beta, 2 * beta, 4 * beta)
    values = [kms_weyl(space, b, branch, g) for b in betas]
    ground = ground_weyl(space, branch, g)
    spread = max(abs(v - values[-1]) for v in values)
    converged = spread <= tol and abs(values[-1] - ground) <= tol
    return ZeroTemperatureLimit(values[-1], ground, betas, float(spread), converged)


def beta_sweep(space, betas, delta, g, branch=None):
    """Rows ``(beta, w_+, w_-, Re<W>, Im<W>)`` for a grid of inverse temperatures.

    With ``branch=None`` the joint KMS state is used for ``<W(g)>``.
    """
    rows = []
    for b in betas:
        w = joint_thermal(b, delta)
        if branch is None:
            val = dynamics.state_expectation(dynamics.JointThermal(b, delta),
                                             dynamics.WeylMatrix.weyl(g), space)
        else:
            val = kms_weyl(space, b, branch, g)
        rows.append((float(b), w.plus, w.minus, float(val.real), float(val.imag)))
    return rows


__all__ = ["ThermalKernel", "ThermalWeights", "planck_density", "joint_thermal",
           "thermal_qubit_marginal", "kms_weyl", "ground_weyl", "zero_temperature_limit",
           "ZeroTemperatureLimit", "beta_sweep", "check_kms_pairings"]
