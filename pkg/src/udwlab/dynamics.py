"""Exact Heisenberg dynamics of the gapless (``Omega = 0``) model.

The Hamiltonian splits over the ``sigma_x`` eigenbasis as
``H = |+><+| (x) H_+ + |-><-| (x) H_-`` with
``H_s = h_0 + s (a(c*) + a^dag(c)) + s Delta`` and ``c = lambda F_k``.  Each
branch is a displaced oscillator, so observables of the form
``sum_ab amp_ab e^{i phi_ab} |a><b| (x) W(f_ab)`` stay in that form.

Conventions: ``phi(g) = a(g*) + a^dag(g)``, ``W(g) = exp(i phi(g))``,
``W(f) W(g) = exp(-i Im<f, g>) W(f + g)``, vacuum ``<W(g)> = exp(-|g|^2/2)``.

Every function taking a ``space`` accepts either a continuum
:class:`~udwlab.modespace.CouplingFunction` or a discrete mode set from
:mod:`udwlab.oracle`; both expose the same ``integrate`` method.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import math

import numpy as np

from .errors import DivergenceError, DomainError, UnsupportedScenarioError
from .modespace import TestFunction, inner_product

PLUS, MINUS = 1, -1
BRANCHES = (PLUS, MINUS)
_INDEX = {PLUS: 0, MINUS: 1}

# |+> = (|e> + |g>)/sqrt2, |-> = (|e> - |g>)/sqrt2, with z-basis order (e, g)
Z_TO_PM = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


def _require_gapless(gap):
    if gap != 0:
        raise UnsupportedScenarioError(
            "exact dynamics are available only for a gapless qubit (Omega = 0)")


def _amplitude_factor(omega, t):
    """``-i (1 - exp(-i omega t)) / omega``: ``F_k(t)`` per unit ``F_k``."""
    return 1j * np.expm1(-1j * omega * t) / omega


def _sin_minus_x(x):
    """``sin x - x`` without cancellation for small ``x``."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    series = -x * x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42 * (1 - x2 / 72)))
    return np.where(np.abs(x) < 0.1, series, np.sin(x) - x)


def mode_amplitude(coupling, k, t):
    """``F_k(t) = -i (F_k / omega_k) (1 - exp(-i omega_k t))`` at unit coupling strength."""
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise DomainError("mode amplitude needs k > 0")
    unit = coupling.with_lambda(1.0)
    out = unit.values(k) * _amplitude_factor(unit.mode_space.omega(k), float(t))
    return complex(out) if out.ndim == 0 else out


def amplitude_function(t):
    """Test function ``lambda F_k(t)`` built from the space's coupling."""
    t = float(t)
    return TestFunction.from_points(
        lambda p: p.coupling * _amplitude_factor(p.omega, t),
        label=f"lamF({t:g})", oscillation=abs(t))


def dressing_function(t):
    """``G(t) = 2 lambda F_k(t) exp(i omega t)``, the argument picked up by ``sigma_z``."""
    t = float(t)
    return TestFunction.from_points(
        lambda p: -2j * p.coupling * np.expm1(1j * p.omega * t) / p.omega,
        label=f"G({t:g})", oscillation=abs(t))


def _check_uv(space, j, what):
    profile = getattr(space, "profile", None)
    if profile is None or space.lam == 0:
        return
    from .diagnostics import uv_verdict
    verdict = uv_verdict(space, j)
    if not verdict.is_finite:
        raise DivergenceError(f"{what} diverges at the UV end", end="UV",
                              exponent=verdict.local_exponent)


def _check_dressing(space, what):
    """``|G(t)|^2 = 4 N(t)`` needs ``R_0`` finite at IR and ``R_2`` finite at UV."""
    _check_uv(space, 2, what)
    if getattr(space, "profile", None) is None or space.lam == 0 or not space.is_massless:
        return
    from .diagnostics import ir_verdict
    verdict = ir_verdict(space, 0)
    if not verdict.is_finite:
        raise DivergenceError(f"{what} diverges at the IR end", end="IR",
                              exponent=verdict.local_exponent)


def theta_phase(space, t):
    """``Theta(t) = int d^n k |lambda F_k|^2 (sin(omega t) - omega t) / omega^2``."""
    t = float(t)
    if t == 0:
        return 0.0
    _check_uv(space, 1, "Theta(t)")
    res = space.integrate(
        lambda p: np.abs(p.coupling) ** 2 * _sin_minus_x(p.omega * t) / p.omega**2, time=t)
    return float(np.real(res.value))


def weyl_phase(space, g, t):
    """``phi(t) = -Im <2 lambda F(t), g>``."""
    if float(t) == 0 or g.is_zero:
        return 0.0
    return -2.0 * inner_product(space, amplitude_function(t), g).imag


def mean_boson_number(space, t):
    """``N(t) = int d^n k |lambda F_k|^2 (2 - 2 cos omega t) / omega^2``."""
    t = float(t)
    if t == 0:
        return 0.0
    _check_dressing(space, "N(t)")
    res = space.integrate(
        lambda p: np.abs(p.coupling) ** 2 * (2.0 * np.sin(0.5 * p.omega * t) / p.omega) ** 2,
        time=t)
    return float(np.real(res.value))


def decoherence(space, t):
    """Decoherence exponent ``Gamma(t) = 2 N(t)``."""
    return 2.0 * mean_boson_number(space, t)


# ---------------------------------------------------------------------------
# Observables


@dataclass(frozen=True)
class WeylEntry:
    """``amplitude * exp(i phase) * W(argument)``."""

    amplitude: complex
    argument: TestFunction
    phase: float = 0.0

    def adjoint(self):
        return WeylEntry(np.conj(self.amplitude), -self.argument, -self.phase)


@dataclass(frozen=True)
class WeylMatrix:
    """2x2 matrix of Weyl entries in the ``sigma_x`` eigenbasis ``(|+>, |->)``.

    ``entries`` maps ``(a, b)`` with ``a, b`` in ``{+1, -1}`` to a
    :class:`WeylEntry`; missing pairs are zero.
    """

    entries: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.entries.get(key)

    def items(self):
        for a in BRANCHES:
            for b in BRANCHES:
                e = self.entries.get((a, b))
                if e is not None:
                    yield (a, b), e

    def adjoint(self):
        return WeylMatrix({(b, a): e.adjoint() for (a, b), e in self.items()})

    @classmethod
    def qubit(cls, matrix_pm):
        """Pure qubit operator (identity on the field), given in the ``+-`` basis."""
        m = np.asarray(matrix_pm, dtype=complex)
        zero = TestFunction.zero()
        return cls({(a, b): WeylEntry(m[_INDEX[a], _INDEX[b]], zero)
                    for a in BRANCHES for b in BRANCHES if m[_INDEX[a], _INDEX[b]] != 0})

    @classmethod
    def weyl(cls, g):
        """``1 (x) W(g)``."""
        return cls({(PLUS, PLUS): WeylEntry(1.0, g), (MINUS, MINUS): WeylEntry(1.0, g)})


EvolvedWeylObservable = WeylMatrix


def evolve_observable(space, obs, t, delta=0.0, *, gap=0.0):
    """Heisenberg-evolve a Weyl matrix by time ``t``.

    For an entry ``|a><b| (x) W(f)`` with ``f' = f exp(i omega t)`` and
    ``G = G(t)`` the result is ``|a><b| (x) W(f' + (a - b)/2 G)`` with phase
    ``a phi_f(t) + (a - b) Delta t - Im<f', (a - b)/2 G>``.
    """
    _require_gapless(gap)
    t = float(t)
    if t == 0:
        return obs
    G = dressing_function(t)
    if any(a != b for (a, b), _ in obs.items()):
        _check_dressing(space, "the dressing G(t)")
    out = {}
    for (a, b), e in obs.items():
        f_rot = e.argument.rotated(t)
        phase = e.phase + a * weyl_phase(space, e.argument, t)
        arg = f_rot
        if a != b:
            shift = G if a == PLUS else -G
            phase += (a - b) * delta * t - inner_product(space, f_rot, shift).imag
            arg = f_rot + shift
        out[(a, b)] = WeylEntry(e.amplitude, arg, phase)
    return WeylMatrix(out)


def evolve_weyl(space, g, t, delta=0.0, *, gap=0.0):
    """``alpha_t(W(g)) = diag(e^{i phi}, e^{-i phi}) W(g e^{i omega t})``."""
    return evolve_observable(space, WeylMatrix.weyl(g), t, delta, gap=gap)


_SIGMA_PM = {
    "x": np.array([[1, 0], [0, -1]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "z": np.array([[0, 1], [1, 0]], dtype=complex),
}


def sigma_pm(axis):
    """Pauli matrix for ``axis`` written in the ``(|+>, |->)`` basis."""
    try:
        return _SIGMA_PM[axis].copy()
    except KeyError:
        raise DomainError(f"unknown axis {axis!r}; expected x, y or z") from None


def evolve_sigma(space, axis, t, delta=0.0, *, gap=0.0):
    """Evolved Pauli operator.

    ``sigma_x`` is conserved.  ``sigma_z`` becomes
    ``e^{2 i Delta t} |+><-| W(G) + e^{-2 i Delta t} |-><+| W(-G)`` and
    ``sigma_y = i sigma_x sigma_z`` carries extra factors ``+i, -i``.
    """
    return evolve_observable(space, WeylMatrix.qubit(sigma_pm(axis)), t, delta, gap=gap)


# ---------------------------------------------------------------------------
# States


@dataclass(frozen=True)
class Vacuum:
    pass


@dataclass(frozen=True)
class Coherent:
    """Coherent field state ``D(amplitude)|0>``."""

    amplitude: TestFunction


@dataclass(frozen=True)
class Kms:
    """Thermal field state at inverse temperature ``beta``.

    With ``branch = +1`` or ``-1`` this is the KMS state of ``H_branch``
    (a thermal state displaced by ``-branch * lambda F / omega``); with
    ``branch = None`` it is the free-field thermal state.
    """

    beta: float
    branch: int | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError("beta must be positive")
        if self.branch not in (None, PLUS, MINUS):
            raise DomainError("branch must be +1, -1 or None")


@dataclass(frozen=True)
class JointGround:
    """Ground state ``|s> (x) |-s lambda F/omega>`` of branch ``s``."""

    branch: int

    def __post_init__(self):
        if self.branch not in (PLUS, MINUS):
            raise DomainError("branch must be +1 or -1")

    @classmethod
    def for_delta(cls, delta):
        if delta == 0:
            raise DomainError("Delta = 0 has a degenerate ground state; pick a branch")
        return cls(MINUS if delta > 0 else PLUS)


@dataclass(frozen=True)
class JointThermal:
    """Joint KMS state: branch KMS states weighted by the qubit Gibbs factors."""

    beta: float
    delta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError("beta must be positive")


@dataclass(frozen=True)
class ProductInitial:
    """``rho (x) field`` with ``rho`` given in the ``z`` (``(e, g)``) or ``pm`` basis."""

    rho: np.ndarray
    field: object = Vacuum()
    basis: str = "z"

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise DomainError("qubit density matrix must be 2x2")
        if not np.allclose(rho, rho.conj().T, atol=1e-12):
            raise DomainError("qubit density matrix must be Hermitian")
        if abs(np.trace(rho) - 1) > 1e-12:
            raise DomainError("qubit density matrix must have unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-12:
            raise DomainError("qubit density matrix must be positive semidefinite")
        if self.basis not in ("z", "pm"):
            raise DomainError("basis must be 'z' or 'pm'")
        if not isinstance(self.field, (Vacuum, Coherent, Kms)):
            raise DomainError("field part must be Vacuum, Coherent or Kms")
        object.__setattr__(self, "rho", rho)

    @property
    def rho_pm(self):
        if self.basis == "pm":
            return self.rho
        return Z_TO_PM @ self.rho @ Z_TO_PM.conj().T

    @classmethod
    def ground_qubit(cls, field_state=None):
        """``|g><g| (x) field`` (default field: vacuum)."""
        return cls(np.diag([0.0, 1.0]), field_state or Vacuum())


def thermal_kernel(beta, omega):
    """``coth(beta omega / 2)``."""
    return 1.0 / np.tanh(0.5 * beta * omega)


def thermal_norm_squared(space, g, beta):
    """``<g, coth(beta omega / 2) g>``."""
    if g.is_zero:
        return 0.0
    res = space.integrate(lambda p: thermal_kernel(beta, p.omega) * np.abs(g(p)) ** 2,
                          breakpoints=g.breakpoints, time=2 * g.oscillation or None)
    return float(np.real(res.value))


def ground_displacement():
    """Test function ``lambda F_k / omega_k``."""
    return TestFunction.from_points(lambda p: p.coupling / p.omega, label="lamF/omega")


def field_weyl(space, state, g, branch=None):
    """``<W(g)>`` in a field state; ``branch`` adds the ground displacement ``-branch * alpha``."""
    if isinstance(state, Kms):
        from .thermal import check_kms_pairings
        check_kms_pairings(space, state.beta, branch if branch is not None else state.branch, g)
        width = thermal_norm_squared(space, g, state.beta)
        branch = state.branch if branch is None else branch
    else:
        width = g.norm_squared(space)
    value = math.exp(-0.5 * width)
    shift = 0j
    if isinstance(state, Coherent):
        shift += inner_product(space, state.amplitude, g)
    if branch is not None:
        shift -= branch * inner_product(space, ground_displacement(), g)
    return value * np.exp(2j * shift.real)


def joint_weights(beta, delta):
    """Gibbs weights ``(w_+, w_-)`` of the two ``sigma_x`` branches."""
    from scipy.special import expit
    return float(expit(-2.0 * beta * delta)), float(expit(2.0 * beta * delta))


def _entry_value(e):
    return e.amplitude * np.exp(1j * e.phase)


def state_expectation(state, obs, space):
    """Expectation of a Weyl matrix (or of ``W(g)`` for a bare test function).

    Field-only states (:class:`Vacuum`, :class:`Coherent`, free :class:`Kms`)
    accept only a bare test function; joint states accept a :class:`WeylMatrix`.
    """
    if isinstance(obs, TestFunction):
        if isinstance(state, (Vacuum, Coherent, Kms)):
            return complex(field_weyl(space, state, obs))
        obs = WeylMatrix.weyl(obs)
    if isinstance(state, (Vacuum, Coherent)) or (isinstance(state, Kms) and state.branch is None):
        raise UnsupportedScenarioError(
            "a field-only state needs a qubit part; wrap it in ProductInitial")
    if isinstance(state, (Kms, JointGround)):
        e = obs[(state.branch, state.branch)]
        if e is None:
            return 0j
        field_state = state if isinstance(state, Kms) else Vacuum()
        return complex(_entry_value(e) * field_weyl(space, field_state, e.argument, state.branch))
    if isinstance(state, JointThermal):
        total = 0j
        for s, w in zip(BRANCHES, joint_weights(state.beta, state.delta)):
            e = obs[(s, s)]
            if e is not None and w > 0:
                total += w * _entry_value(e) * field_weyl(
                    space, Kms(state.beta, s), e.argument)
        return complex(total)
    if isinstance(state, ProductInitial):
        rho = state.rho_pm
        total = 0j
        for (a, b), e in obs.items():
            weight = rho[_INDEX[b], _INDEX[a]]
            if weight != 0:
                total += weight * _entry_value(e) * field_weyl(space, state.field, e.argument)
        return complex(total)
    raise DomainError(f"unknown state {state!r}")


def _entropy(eigs):
    eigs = np.clip(np.real(eigs), 0.0, 1.0)
    nz = eigs[eigs > 1e-300]
    return float(-np.sum(nz * np.log(nz)))


def reduced_qubit(space, initial, t, delta=0.0, *, gap=0.0, basis="pm"):
    """Reduced qubit state at time ``t`` and its von Neumann entropy.

    ``rho_ab(t) = Tr[rho(0) alpha_t(|b><a| (x) 1)]``; coherences in the
    ``+-`` basis are multiplied by the field expectation of ``W(+-G(t))``,
    which for the vacuum has modulus ``exp(-2 N(t))``.
    """
    if not isinstance(initial, ProductInitial):
        raise UnsupportedScenarioError("reduced_qubit needs a ProductInitial state")
    _require_gapless(gap)
    rho_pm = np.zeros((2, 2), dtype=complex)
    for a in BRANCHES:
        for b in BRANCHES:
            unit = np.zeros((2, 2))
            unit[_INDEX[b], _INDEX[a]] = 1.0
            obs = evolve_observable(space, WeylMatrix.qubit(unit), t, delta)
            rho_pm[_INDEX[a], _INDEX[b]] = state_expectation(initial, obs, space)
    rho_pm = 0.5 * (rho_pm + rho_pm.conj().T)
    entropy = _entropy(np.linalg.eigvalsh(rho_pm))
    if basis == "z":
        return Z_TO_PM.conj().T @ rho_pm @ Z_TO_PM, entropy
    return rho_pm, entropy


# ---------------------------------------------------------------------------
# Time series


@dataclass
class TimeSeries:
    """Samples of one observable channel."""

    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values)
        if self.times.ndim != 1 or self.values.shape != self.times.shape:
            raise DomainError("times and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("times must be strictly increasing")

    @property
    def is_complex(self):
        return np.iscomplexobj(self.values)

    def rows(self):
        if self.is_complex:
            return [(float(t), float(v.real), float(v.imag)) for t, v in zip(self.times, self.values)]
        return [(float(t), float(v)) for t, v in zip(self.times, self.values)]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("t", "re", "im") if self.is_complex else ("t", "value"))
        for row in self.rows():
            writer.writerow([repr(x) for x in row])
        return buf.getvalue()

    def to_dict(self):
        if self.is_complex:
            values = {"re": [float(v.real) for v in self.values],
                      "im": [float(v.imag) for v in self.values]}
        else:
            values = {"value": [float(v) for v in self.values]}
        return {"metadata": self.metadata, "t": [float(t) for t in self.times], **values}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def sample(fn, times, **metadata):
    """Evaluate ``fn(t)`` on ``times`` into a :class:`TimeSeries`."""
    values = [fn(t) for t in times]
    return TimeSeries(times, np.array(values), dict(metadata))
