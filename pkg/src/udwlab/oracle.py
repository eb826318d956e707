"""Brute-force truncated-Fock verifier for the gapless spin-boson Hamiltonian.

The field is reduced to ``M`` discrete modes ``(omega_j, c_j)`` and every mode
is truncated at occupation ``n_max``.  Basis order: qubit slowest (z basis,
``(e, g)``), then modes with mode 0 fastest.  The Hamiltonian is

    H = sum_j omega_j a_j^dag a_j + Delta sigma_x
        + sigma_x (x) sum_j (c_j* a_j + c_j a_j^dag).
"""

from dataclasses import dataclass, field
import json
import functools
import math

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import quadrature
from .errors import (
    BudgetExceededError,
    ConvergenceError,
    DomainError,
    TruncationError,
)
from .modespace import ModePoints, sphere_area

DEFAULT_BUDGET = 200_000
DENSE_LIMIT = 4096
HERMITIAN_TOL = 1e-13
CONVERGENCE_TOL = 1e-10
TAIL_THRESHOLD = 1e-10
MAX_DOUBLINGS = 6

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DiscreteModes:
    """Finite mode set with weight-absorbed couplings ``c_j``.

    Parameters
    ----------
    omega : array_like
        Positive mode frequencies.
    coupling : array_like
        Effective couplings ``c_j`` (``lambda F_j`` times the square-root
        quadrature weight).
    k, sqrt_weights : array_like, optional
        Grid momenta and square-root weights; radial test functions are
        evaluated as ``g(k_j) * sqrt_weights_j``.
    """

    def __init__(self, omega, coupling, k=None, sqrt_weights=None, metadata=None):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        coupling = np.atleast_1d(np.asarray(coupling, dtype=complex))
        if omega.shape != coupling.shape or omega.ndim != 1:
            raise DomainError("omega and coupling must be 1-D arrays of equal length")
        if np.any(omega <= 0):
            raise DomainError("discrete mode frequencies must be positive")
        k = omega.copy() if k is None else np.atleast_1d(np.asarray(k, dtype=float))
        sw = np.ones_like(omega) if sqrt_weights is None else np.atleast_1d(
            np.asarray(sqrt_weights, dtype=float))
        order = np.argsort(omega, kind="stable")
        self.omega = omega[order]
        self.coupling = coupling[order]
        self.k = k[order]
        self.sqrt_weights = sw[order]
        if np.all(np.isreal(self.coupling)):
            self.coupling = self.coupling.real.astype(complex)
        self.metadata = dict(metadata or {})

    def __repr__(self):
        return f"DiscreteModes(M={self.size}, omega={self.omega.tolist()})"

    def __len__(self):
        return self.size

    @property
    def size(self):
        return int(self.omega.size)

    @property
    def lam(self):
        return 1.0 if np.any(self.coupling != 0) else 0.0

    def scaled(self, factor):
        return DiscreteModes(self.omega, factor * self.coupling, self.k, self.sqrt_weights,
                             self.metadata)

    def points(self, k=None):
        return ModePoints(self.k, self.omega, self.coupling, self.sqrt_weights)

    def integrate(self, density, k_min=0.0, k_max=math.inf, **_ignored):
        """Plain sum of ``density`` over modes with ``k_min <= k < k_max``."""
        values = np.asarray(density(self.points()))
        mask = (self.k >= k_min) & (self.k < k_max)
        return quadrature.QuadResult(complex(np.sum(values[mask])), 0.0, int(mask.sum()))

    def displacement(self):
        """Per-mode ground displacement ``c_j / omega_j``."""
        return self.coupling / self.omega

    def ground_energy(self, delta=0.0):
        """Completed-square ground energy ``-sum |c_j|^2 / omega_j - |Delta|``."""
        return float(-np.sum(np.abs(self.coupling) ** 2 / self.omega) - abs(delta))


@dataclass(frozen=True)
class LinearGrid:
    k_max: float


@dataclass(frozen=True)
class GaussPanels:
    k_max: float
    nodes_per_panel: int = 16


def _grid(strategy, M):
    if isinstance(strategy, LinearGrid):
        h = strategy.k_max / M
        return (np.arange(M) + 0.5) * h, np.full(M, h)
    if isinstance(strategy, GaussPanels):
        panels = max(1, math.ceil(M / strategy.nodes_per_panel))
        counts = [M // panels + (1 if i < M % panels else 0) for i in range(panels)]
        edges = np.linspace(0.0, strategy.k_max, panels + 1)
        ks, ws = [], []
        for (a, b), cnt in zip(zip(edges[:-1], edges[1:]), counts):
            x, w = np.polynomial.legendre.leggauss(cnt)
            ks.append(0.5 * (b - a) * x + 0.5 * (a + b))
            ws.append(0.5 * (b - a) * w)
        return np.concatenate(ks), np.concatenate(ws)
    raise DomainError(f"unknown discretization strategy {strategy!r}")


def discretize(coupling, M, strategy):
    """Reduce a continuum coupling to ``M`` modes on a quadrature grid.

    ``|c_j|^2 = lambda^2 F(k_j)^2 S_{n-1} k_j^(n-1) w_j``.  Refuses when the
    profile mass ``int |F~|^2 k^(n-1) dk`` beyond ``k_max`` exceeds
    ``1e-10`` of the total.
    """
    if int(M) != M or M < 1:
        raise DomainError("mode count must be a positive integer")
    if not strategy.k_max > 0:
        raise DomainError("k_max must be positive")
    prof = coupling.profile
    n = coupling.n

    def mass(k):
        return np.abs(prof(k)) ** 2 * k ** (n - 1)

    lo, hi = prof.domain
    total = quadrature.integrate(mass, lo, hi, breakpoints=prof.breakpoints, scale=prof.scale)
    tail = quadrature.integrate(mass, max(lo, strategy.k_max), hi,
                                breakpoints=prof.breakpoints, scale=prof.scale) \
        if strategy.k_max < hi else quadrature.QuadResult(0.0, 0.0, 0)
    ratio = float(np.real(tail.value) / np.real(total.value)) if total.value else 0.0
    if ratio > TAIL_THRESHOLD:
        raise DomainError(
            f"k_max = {strategy.k_max:g} leaves profile tail mass {ratio:.3g} "
            f"(threshold {TAIL_THRESHOLD:g}); increase k_max")
    k, w = _grid(strategy, int(M))
    sqrt_w = np.sqrt(sphere_area(n) * k ** (n - 1) * w)
    c = coupling.values(k) * sqrt_w
    modes = DiscreteModes(coupling.mode_space.omega(k), c, k, sqrt_w)
    r1_discrete = float(np.sum(np.abs(modes.coupling) ** 2 / modes.omega))
    meta = {"strategy": type(strategy).__name__, "k_max": strategy.k_max, "M": int(M),
            "tail_ratio": ratio, "r1_discrete": r1_discrete}
    try:
        from .diagnostics import r_integral
        r1 = r_integral(coupling, 1)
        if r1.is_finite:
            meta["r1_continuum"] = r1.value
            meta["r1_error"] = r1.error_estimate
    except Exception as exc:  # recorded, not fatal: the oracle works on the modes
        meta["r1_continuum_error"] = str(exc)
    modes.metadata.update(meta)
    return modes


# ---------------------------------------------------------------------------
# Hamiltonian


def _annihilation(n_max):
    return sp.diags(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1, format="csr")


def _embed(op, j, M, n_max):
    """``op`` acting on mode ``j`` of the field register (mode 0 fastest)."""
    eye = sp.identity(n_max + 1, format="csr")
    out = sp.identity(1, format="csr")
    for mode in reversed(range(M)):
        out = sp.kron(out, op if mode == j else eye, format="csr")
    return out


@dataclass
class OracleSystem:
    modes: DiscreteModes
    n_max: int
    delta: float
    hamiltonian: sp.csr_matrix
    convergence: list = field(default_factory=list)
    _eig: tuple | None = field(default=None, repr=False)

    @property
    def dimension(self):
        return self.hamiltonian.shape[0]

    @property
    def field_shape(self):
        return (self.n_max + 1,) * self.modes.size

    @property
    def is_dense(self):
        return self.dimension <= DENSE_LIMIT

    def eigh(self):
        """Full eigendecomposition (dense systems only), cached."""
        if self._eig is None:
            if not self.is_dense:
                raise BudgetExceededError(
                    f"full diagonalization limited to dimension {DENSE_LIMIT}",
                    dimension=self.dimension, budget=DENSE_LIMIT)
            theta = np.angle(self.modes.coupling)
            if np.any(theta != 0):
                # W a_j W^dag = e^{-i theta_j} a_j for W = exp(i sum theta_j n_j): the
                # phases of c_j move into W and the matrix to diagonalize is real.
                real_modes = DiscreteModes(self.modes.omega, np.abs(self.modes.coupling))
                H = build_hamiltonian(real_modes, self.delta, self.n_max,
                                      budget=math.inf).hamiltonian.toarray()
                vals, vecs = scipy.linalg.eigh(H, driver="evd")
                self._eig = (vals, self.gauge_phases()[:, None] * vecs)
            else:
                self._eig = scipy.linalg.eigh(self.hamiltonian.toarray().real, driver="evd")
        return self._eig

    def gauge_phases(self):
        """Diagonal of ``exp(i sum_j arg(c_j) n_j)`` on the full basis."""
        occ = np.indices(self.field_shape).reshape(self.modes.size, -1)
        # field axis 0 is the slowest index, i.e. the last mode
        theta = np.angle(self.modes.coupling)[::-1]
        phase = np.exp(1j * (theta @ occ))
        return np.concatenate([phase, phase])


def dimension(M, n_max):
    return 2 * (n_max + 1) ** M


def build_hamiltonian(modes, delta, n_max, budget=DEFAULT_BUDGET):
    """Assemble the truncated Hamiltonian as a sparse Hermitian matrix."""
    if int(n_max) != n_max or n_max < 1:
        raise DomainError("n_max must be a positive integer")
    n_max = int(n_max)
    M = modes.size
    dim = dimension(M, n_max)
    if dim > budget:
        raise BudgetExceededError(
            f"Hilbert-space dimension {dim} exceeds budget {budget}", dimension=dim,
            budget=budget)
    a = _annihilation(n_max)
    num = sp.diags(np.arange(n_max + 1, dtype=float), format="csr")
    field_dim = (n_max + 1) ** M
    free = sp.csr_matrix((field_dim, field_dim))
    interaction = sp.csr_matrix((field_dim, field_dim), dtype=complex)
    for j, (w, c) in enumerate(zip(modes.omega, modes.coupling)):
        free = free + w * _embed(num, j, M, n_max)
        aj = _embed(a, j, M, n_max)
        interaction = interaction + np.conj(c) * aj + c * aj.T
    sx = sp.csr_matrix(SIGMA["x"])
    H = (sp.kron(sp.identity(2), free) + delta * sp.kron(sx, sp.identity(field_dim))
         + sp.kron(sx, interaction)).tocsr()
    if np.all(H.data.imag == 0):
        H = H.real.tocsr()
    asym = abs(H - H.conj().T)
    if asym.nnz and asym.max() > HERMITIAN_TOL:
        raise DomainError(f"assembled Hamiltonian not Hermitian (max asymmetry {asym.max():.3g})")
    return OracleSystem(modes, n_max, float(delta), H)


def _lowest(system, count=2):
    if system.is_dense:
        vals, vecs = system.eigh()
        return vals[:count], vecs[:, :count]
    v0 = np.ones(system.dimension) / math.sqrt(system.dimension)
    vals, vecs = spla.eigsh(system.hamiltonian, k=count, which="SA", v0=v0, tol=1e-14)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def default_n_max(modes):
    return math.ceil(4 * float(np.max(np.abs(modes.displacement()) ** 2)) + 10)


def ground_state(system, tol=CONVERGENCE_TOL, check=True):
    """Lowest eigenpair; with ``check`` the energy is compared against ``n_max/2``.

    Raises :class:`ConvergenceError` (carrying the comparison table) when the
    two truncations differ by ``tol`` or more.
    """
    vals, vecs = _lowest(system)
    energy, psi = float(vals[0]), vecs[:, 0]
    if check:
        half = math.ceil(system.n_max / 2)
        e_half = float(_lowest(build_hamiltonian(system.modes, system.delta, half,
                                                 budget=math.inf))[0][0])
        row = {"n_max": system.n_max, "energy": energy, "half_n_max": half,
               "half_energy": e_half, "delta_energy": abs(energy - e_half)}
        if not system.convergence or system.convergence[-1] != row:
            system.convergence.append(row)
        if abs(energy - e_half) >= tol:
            raise ConvergenceError(
                f"ground energy not converged in n_max={system.n_max}: "
                f"|E - E_half| = {abs(energy - e_half):.3g}", list(system.convergence))
    return energy, psi


def ground_branches(system, tol=1e-9):
    """Ground vectors keyed by ``sigma_x`` branch (``+1``/``-1``).

    With ``delta != 0`` the ground state is unique and lies in one branch.
    At ``delta == 0`` the lowest two levels are degenerate and ``sigma_x`` is
    diagonalized inside that pair to split them.
    """
    vals, vecs = _lowest(system, 2)
    sx = sp.kron(sp.csr_matrix(SIGMA["x"]), sp.identity(system.dimension // 2), format="csr")
    if abs(vals[1] - vals[0]) > tol * max(1.0, abs(vals[0])):
        psi = vecs[:, 0]
        s = float(np.real(np.vdot(psi, sx @ psi)))
        return {1 if s > 0 else -1: psi}
    block = vecs.conj().T @ (sx @ vecs)
    evals, rot = np.linalg.eigh(0.5 * (block + block.conj().T))
    pair = vecs @ rot
    return {(1 if e > 0 else -1): pair[:, i] / np.linalg.norm(pair[:, i])
            for i, e in enumerate(evals)}


def auto_system(modes, delta, tol=CONVERGENCE_TOL, budget=DEFAULT_BUDGET, n_start=None):
    """Build with the default ``n_max`` policy and double until the energy converges."""
    n = n_start or default_n_max(modes)
    table = []
    for _ in range(MAX_DOUBLINGS):
        system = build_hamiltonian(modes, delta, n, budget)
        try:
            ground_state(system, tol)
            system.convergence = table + system.convergence
            return system
        except ConvergenceError as exc:
            table.extend(exc.table)
        n *= 2
    raise ConvergenceError(f"n_max sweep did not converge within {MAX_DOUBLINGS} doublings",
                           table)


def evolve(system, psi0, t):
    """``exp(-i H t) psi0`` (eigendecomposition, or Krylov action for large systems)."""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (system.dimension,):
        raise DomainError(f"state has shape {psi0.shape}, expected ({system.dimension},)")
    if t == 0:
        return psi0.copy()
    if system.is_dense:
        vals, vecs = system.eigh()
        if np.isrealobj(vecs):
            # keep the large real matrix real: complex promotion would copy it
            coeffs = (vecs.T @ psi0.real + 1j * (vecs.T @ psi0.imag)) * np.exp(-1j * vals * t)
            return vecs @ coeffs.real + 1j * (vecs @ coeffs.imag)
        coeffs = np.conj(vecs.T @ np.conj(psi0))
        return vecs @ (np.exp(-1j * vals * t) * coeffs)
    return spla.expm_multiply(-1j * t * system.hamiltonian, psi0)


# ---------------------------------------------------------------------------
# States and observables


def qubit_vector(label):
    """z-basis qubit vector for ``e, g, +, -``."""
    vecs = {"e": [1, 0], "g": [0, 1], "+": [1, 1], "-": [1, -1]}
    if label not in vecs:
        raise DomainError(f"unknown qubit label {label!r}; expected e, g, + or -")
    v = np.asarray(vecs[label], dtype=complex)
    return v / np.linalg.norm(v)


def coherent_vector(alpha, n_max):
    """Truncated coherent state ``|alpha>`` (renormalized)."""
    v = np.empty(n_max + 1, dtype=complex)
    v[0] = 1.0
    for i in range(1, n_max + 1):
        v[i] = v[i - 1] * alpha / math.sqrt(i)
    return v / np.linalg.norm(v)


def product_state(qubit, field_vectors):
    """``qubit (x) field`` with ``field_vectors[j]`` the state of mode ``j``."""
    out = np.asarray(qubit, dtype=complex)
    for v in reversed(field_vectors):
        out = np.kron(out, v)
    return out


def vacuum_state(system, qubit="g"):
    vac = np.zeros(system.n_max + 1)
    vac[0] = 1.0
    q = qubit_vector(qubit) if isinstance(qubit, str) else qubit
    return product_state(q, [vac] * system.modes.size)


@dataclass(frozen=True)
class Thermal:
    """Gibbs state ``exp(-beta H) / Z`` over the truncated spectrum."""

    beta: float


@dataclass(frozen=True)
class WeylDisplacement:
    """``qubit (x) W(g)`` with discrete amplitudes ``g_j`` (qubit defaults to identity)."""

    g: np.ndarray
    qubit: np.ndarray | None = None


@dataclass(frozen=True)
class SigmaAxis:
    axis: str


@dataclass(frozen=True)
class NumberTotal:
    pass


@dataclass(frozen=True)
class NumberDistribution:
    pass


@dataclass(frozen=True)
class QubitReduced:
    pass


def _tensor(psi, system):
    return psi.reshape((2,) + system.field_shape)


def _mode_axis(j, M):
    # axis 0 is the qubit; mode 0 is the last (fastest) axis
    return M - j


def _apply_mode(op, psi_t, j, M):
    axis = _mode_axis(j, M)
    out = np.tensordot(op, psi_t, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def weyl_matrix(g, n_max):
    """Truncated single-mode ``exp(i (g* a + g a^dag))`` (cached, read-only)."""
    return _weyl_matrix(complex(g), int(n_max))


@functools.lru_cache(maxsize=256)
def _weyl_matrix(g, n_max):
    a = _annihilation(n_max).toarray()
    out = scipy.linalg.expm(1j * (np.conj(g) * a + g * a.T))
    out.flags.writeable = False
    return out


def _mode_distribution(psi_t, j, M):
    axis = _mode_axis(j, M)
    other = tuple(i for i in range(psi_t.ndim) if i != axis)
    return (np.abs(psi_t) ** 2).sum(axis=other)


def _moments(p):
    n = np.arange(p.size)
    mean = float(p @ n)
    var = float(p @ n**2) - mean**2
    return mean, math.sqrt(max(var, 0.0))


def _mode_moments(psi_t, j, M, n_max):
    return _moments(_mode_distribution(psi_t, j, M))


def _require_margin(distributions, n_max):
    for j, p in enumerate(distributions):
        mean, std = _moments(p)
        if mean + 5 * std >= n_max:
            raise TruncationError(
                f"mode {j}: <n> + 5 sigma = {mean + 5 * std:.3g} >= n_max = {n_max}")


def check_truncation(system, psi, weights=None):
    """Require ``<n_j> + 5 sigma_j < n_max`` for every mode.

    ``psi`` may be a single vector or, with ``weights``, the columns of a
    mixture; the criterion is then applied to the mixed occupation statistics.
    """
    M = system.modes.size
    if weights is None:
        probs = np.abs(psi) ** 2
    else:
        probs = (np.abs(np.asarray(psi)) ** 2) @ np.asarray(weights)
    probs_t = _tensor(probs, system)
    _require_margin([_mode_distribution(np.sqrt(probs_t), j, M) for j in range(M)],
                    system.n_max)


_BATCH = 256


def _weyl_batch(system, vecs, obs):
    """``<v_k| qubit (x) W(g) |v_k>`` for every column ``v_k`` of ``vecs``."""
    M = system.modes.size
    g = np.broadcast_to(np.asarray(obs.g, dtype=complex), (M,))
    out_vals = []
    for lo in range(0, vecs.shape[1], _BATCH):
        block = vecs[:, lo:lo + _BATCH]
        psi_t = block.reshape((2,) + system.field_shape + (block.shape[1],))
        out = psi_t.astype(complex)
        for j in range(M):
            if g[j] != 0:
                out = _apply_mode(weyl_matrix(g[j], system.n_max), out, j, M)
        if obs.qubit is not None:
            out = np.tensordot(np.asarray(obs.qubit, dtype=complex), out, axes=([1], [0]))
        flat = out.reshape(-1, block.shape[1])
        out_vals.append(np.einsum("ik,ik->k", block.conj(), flat))
    return np.concatenate(out_vals)


def _mixed_expectation(system, vecs, weights, obs):
    M = system.modes.size
    if isinstance(obs, SigmaAxis):
        obs = WeylDisplacement(np.zeros(M), SIGMA[obs.axis])
    if isinstance(obs, WeylDisplacement):
        return complex(weights @ _weyl_batch(system, vecs, obs))
    if isinstance(obs, QubitReduced):
        flat = vecs.reshape(2, -1, vecs.shape[1])
        return np.einsum("iak,jak,k->ij", flat, flat.conj(), weights)
    if isinstance(obs, (NumberTotal, NumberDistribution)):
        # both are linear in the occupation probabilities
        probs = (np.abs(vecs) ** 2) @ weights
        return _pure_expectation(system, np.sqrt(probs), obs)
    raise DomainError(f"unknown observable {obs!r}")


def _pure_expectation(system, psi, obs):
    M = system.modes.size
    psi_t = _tensor(psi, system)
    if isinstance(obs, SigmaAxis):
        obs = WeylDisplacement(np.zeros(M), SIGMA[obs.axis])
    if isinstance(obs, WeylDisplacement):
        return complex(_weyl_batch(system, np.asarray(psi)[:, None], obs)[0])
    probs = np.abs(psi_t) ** 2
    if isinstance(obs, NumberTotal):
        total = 0.0
        for j in range(M):
            total += _mode_moments(psi_t, j, M, system.n_max)[0]
        return total
    if isinstance(obs, NumberDistribution):
        occ = np.indices(system.field_shape).sum(axis=0)
        field_probs = probs.sum(axis=0)
        return np.bincount(occ.ravel(), weights=field_probs.ravel(),
                           minlength=M * system.n_max + 1)
    if isinstance(obs, QubitReduced):
        flat = psi_t.reshape(2, -1)
        return flat @ flat.conj().T
    raise DomainError(f"unknown observable {obs!r}")


def expectation(system, state, obs, check=True):
    """Expectation of ``obs`` in a pure state vector or a :class:`Thermal` state."""
    if isinstance(state, Thermal):
        vals, vecs = system.eigh()
        weights = np.exp(-state.beta * (vals - vals[0]))
        weights /= weights.sum()
        keep = weights > 1e-300
        if check:
            check_truncation(system, vecs[:, keep], weights[keep])
        return _mixed_expectation(system, vecs[:, keep], weights[keep], obs)
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (system.dimension,):
        raise DomainError(f"state has shape {psi.shape}, expected ({system.dimension},)")
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise DomainError("state vector is not normalized")
    if check:
        check_truncation(system, psi)
    return _pure_expectation(system, psi, obs)


def entropy(rho):
    eigs = np.clip(np.linalg.eigvalsh(rho), 0.0, 1.0)
    nz = eigs[eigs > 1e-300]
    return float(-np.sum(nz * np.log(nz)))


# ---------------------------------------------------------------------------
# Fixtures


def dump_fixture(system, path, eigenvalues=8):
    vals, _ = _lowest(system, min(eigenvalues, system.dimension - 1))
    data = {
        "modes": {"omega": system.modes.omega.tolist(),
                  "coupling_re": system.modes.coupling.real.tolist(),
                  "coupling_im": system.modes.coupling.imag.tolist()},
        "delta": system.delta,
        "n_max": system.n_max,
        "eigenvalues": [float(v) for v in vals],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
    return data


def load_fixture(path):
    """Return ``(modes, delta, n_max, eigenvalues)`` from a fixture file."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    m = data["modes"]
    c = np.asarray(m["coupling_re"]) + 1j * np.asarray(m["coupling_im"])
    return DiscreteModes(m["omega"], c), data["delta"], data["n_max"], np.asarray(data["eigenvalues"])
