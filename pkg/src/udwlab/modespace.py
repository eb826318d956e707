"""Field kinematics, isotropic smearing profiles and the k-space coupling.

Everything here is radial: integrals over ``R^n`` are reduced to
``S_{n-1} * int_0^inf k^(n-1) (...) dk`` with ``S_{n-1}`` the area of the unit
sphere.  Integrands are written against :class:`ModePoints`, a small bundle of
``(k, omega, coupling, scale)`` arrays, so that the same integrand can be
summed over a discrete mode set (see :mod:`udwlab.oracle`) or integrated over
the continuum.
"""

from dataclasses import dataclass, field
import csv
import enum
import math

import numpy as np
from scipy import special
from scipy.interpolate import PchipInterpolator

from . import quadrature
from .errors import DomainError, QuadratureError, SingularPointError

# Above this argument the 0F1 series loses digits; switch to the Bessel form.
_BUMP_SERIES_LIMIT = 20.0


class DispersionKind(enum.Enum):
    MASSLESS = "massless"
    MASSIVE = "massive"


@dataclass(frozen=True)
class Dispersion:
    """Relativistic dispersion ``omega(k) = sqrt(k^2 + m^2)``."""

    mass: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.mass) and self.mass >= 0):
            raise DomainError(f"mass must be finite and non-negative, got {self.mass}")

    @classmethod
    def massless(cls):
        return cls(0.0)

    @classmethod
    def massive(cls, mass):
        if mass <= 0:
            raise DomainError("a massive dispersion needs mass > 0")
        return cls(float(mass))

    @property
    def kind(self):
        return DispersionKind.MASSLESS if self.mass == 0 else DispersionKind.MASSIVE

    @property
    def is_massless(self):
        return self.mass == 0

    def omega(self, k):
        k = np.asarray(k, dtype=float)
        if self.mass == 0:
            return np.abs(k)
        return np.hypot(k, self.mass)

    def momentum(self, omega):
        """Inverse dispersion: the ``k >= 0`` with ``omega(k) = omega`` (0 below the gap)."""
        w = np.asarray(omega, dtype=float)
        return np.sqrt(np.maximum(w * w - self.mass**2, 0.0))


@dataclass(frozen=True)
class ModeSpace:
    """Spatial dimension plus dispersion relation."""

    n: int
    dispersion: Dispersion = field(default_factory=Dispersion)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"spatial dimension must be a positive integer, got {self.n}")

    @property
    def sphere_area(self):
        return sphere_area(self.n)

    def omega(self, k):
        return self.dispersion.omega(k)


def sphere_area(n):
    """Area ``2 pi^(n/2) / Gamma(n/2)`` of the unit sphere in ``R^n``."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def omega(mode_space, k):
    """Mode frequency ``sqrt(k^2 + m^2)``; negative ``k`` is a domain error."""
    karr = np.asarray(k, dtype=float)
    if np.any(karr < 0) or np.any(~np.isfinite(karr)):
        raise DomainError("wavenumber must be finite and non-negative")
    out = mode_space.omega(karr)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Profiles


class SpatialProfile:
    """Base class for isotropic profiles, represented by their radial transform.

    Subclasses implement ``_evaluate`` on a float array of ``k >= 0``.
    ``ir_exponent`` is the analytic small-k power ``a`` in ``F~(k) ~ k^a`` (or
    ``None`` when unknown), ``support_end`` the largest ``k`` where the
    transform can be nonzero and ``scale`` a characteristic wavenumber.
    """

    ir_exponent = 0.0
    uv_exponent = -math.inf
    support_end = math.inf
    domain = (0.0, math.inf)

    @property
    def breakpoints(self):
        return ()

    @property
    def scale(self):
        return 1.0

    def _evaluate(self, k):
        raise NotImplementedError

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k < 0):
            raise DomainError("profile evaluated at negative k")
        return self._evaluate(k)


@dataclass(frozen=True)
class Gaussian(SpatialProfile):
    """Gaussian smearing of width ``sigma``: ``exp(-sigma^2 k^2 / 2)``."""

    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("Gaussian width must be positive")

    @property
    def scale(self):
        return 1.0 / self.sigma

    def _evaluate(self, k):
        return np.exp(-0.5 * (self.sigma * k) ** 2)


@dataclass(frozen=True)
class Lorentzian(SpatialProfile):
    """Poisson-kernel smearing of width ``sigma``: transform ``exp(-sigma k)``."""

    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("Lorentzian width must be positive")

    @property
    def scale(self):
        return 1.0 / self.sigma

    def _evaluate(self, k):
        return np.exp(-self.sigma * k)


@dataclass(frozen=True)
class CompactBump(SpatialProfile):
    """Uniform ball of radius ``rho`` in ``R^n`` with unit total weight.

    The transform is ``0F1(; n/2 + 1; -(k rho)^2 / 4)``, which equals
    ``Gamma(n/2+1) (2/(k rho))^(n/2) J_{n/2}(k rho)``.  It decays like
    ``k^(-(n+1)/2)`` and oscillates.
    """

    rho: float = 1.0
    n: int = 3

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError("bump radius must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("bump dimension must be a positive integer")

    @property
    def scale(self):
        return 1.0 / self.rho

    @property
    def uv_exponent(self):
        return -(self.n + 1) / 2

    def _evaluate(self, k):
        x = k * self.rho
        nu = self.n / 2
        out = np.empty_like(x)
        small = x < _BUMP_SERIES_LIMIT
        out[small] = special.hyp0f1(nu + 1, -0.25 * x[small] ** 2)
        xl = x[~small]
        log_pref = math.lgamma(nu + 1) + nu * np.log(2.0 / xl)
        out[~small] = np.exp(log_pref) * special.jv(nu, xl)
        return out


@dataclass(frozen=True)
class Pointlike(SpatialProfile):
    """Point detector with a sharp UV cutoff: transform 1 for ``k <= K``, else 0."""

    cutoff: float = 1.0

    def __post_init__(self):
        if not self.cutoff > 0:
            raise DomainError("UV cutoff must be positive")

    @property
    def support_end(self):
        return float(self.cutoff)

    @property
    def breakpoints(self):
        return (float(self.cutoff),)

    @property
    def scale(self):
        return float(self.cutoff)

    def _evaluate(self, k):
        return np.where(k <= self.cutoff, 1.0, 0.0)


@dataclass(frozen=True)
class PowerRegularized(SpatialProfile):
    """``k^a`` times a base profile, ``a >= 0`` (extra infrared suppression)."""

    exponent: float
    base: SpatialProfile

    def __post_init__(self):
        if not self.exponent >= 0:
            raise DomainError("regularizing exponent must be non-negative")

    @property
    def ir_exponent(self):
        base = self.base.ir_exponent
        return None if base is None else base + self.exponent

    @property
    def uv_exponent(self):
        base = self.base.uv_exponent
        return None if base is None else base + self.exponent

    @property
    def support_end(self):
        return self.base.support_end

    @property
    def domain(self):
        return self.base.domain

    @property
    def breakpoints(self):
        return self.base.breakpoints

    @property
    def scale(self):
        return self.base.scale

    def _evaluate(self, k):
        return k**self.exponent * self.base(k)


class Tabulated(SpatialProfile):
    """Sampled radial transform, interpolated monotonically in ``log k``.

    Uses a shape-preserving (PCHIP) cubic on ``(log k, F~)``; asking for a
    value outside ``[k_min, k_max]`` raises :class:`DomainError`.
    """

    ir_exponent = None
    uv_exponent = None

    def __init__(self, k, values):
        k = np.asarray(k, dtype=float)
        values = np.asarray(values, dtype=float)
        if k.ndim != 1 or k.shape != values.shape or k.size < 2:
            raise DomainError("tabulated profile needs two equal-length 1-D arrays (>= 2 rows)")
        if np.any(k <= 0) or np.any(np.diff(k) <= 0):
            raise DomainError("tabulated k must be positive and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DomainError("tabulated values must be finite")
        self.k = k
        self.values = values
        self._interp = PchipInterpolator(np.log(k), values, extrapolate=False)

    def __repr__(self):
        return f"Tabulated(k=[{self.k[0]:g}..{self.k[-1]:g}], rows={self.k.size})"

    def __eq__(self, other):
        return (isinstance(other, Tabulated) and np.array_equal(self.k, other.k)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    @classmethod
    def from_csv(cls, path):
        """Load two columns ``k, F~(k)``; ``#`` starts a comment."""
        rows = []
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                text = ",".join(row).split("#", 1)[0].strip()
                if not text:
                    continue
                cells = [c.strip() for c in text.split(",") if c.strip()]
                if len(cells) != 2:
                    raise DomainError(f"{path}:{lineno}: expected two columns, got {len(cells)}")
                try:
                    rows.append((float(cells[0]), float(cells[1])))
                except ValueError as exc:
                    raise DomainError(f"{path}:{lineno}: {exc}") from None
        if not rows:
            raise DomainError(f"{path}: no data rows")
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1])

    @property
    def domain(self):
        return (float(self.k[0]), float(self.k[-1]))

    @property
    def support_end(self):
        return float(self.k[-1])

    @property
    def scale(self):
        return float(np.sqrt(self.k[0] * self.k[-1]))

    def _evaluate(self, k):
        lo, hi = self.domain
        # a relative slack absorbs rounding in mapped quadrature nodes
        if np.any(k < lo * (1 - 1e-12)) or np.any(k > hi * (1 + 1e-12)):
            raise DomainError(f"tabulated profile evaluated outside [{lo:g}, {hi:g}]")
        return self._interp(np.log(np.clip(k, lo, hi)))


def profile_fourier(profile, k):
    """Radial Fourier transform ``F~(k)`` of ``profile``."""
    out = profile(k)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Mode points, coupling and test functions


@dataclass(frozen=True)
class ModePoints:
    """Sample of modes handed to integrands.

    ``coupling`` is ``lambda * F_k`` (times ``scale``); ``scale`` is 1 on the
    continuum and the square-root quadrature weight for discrete modes, so
    that radial test functions pick up the same weight as the coupling.
    """

    k: np.ndarray
    omega: np.ndarray
    coupling: np.ndarray
    scale: np.ndarray


def _period_breakpoints(dispersion, t, k_lo, k_hi):
    """Wavenumbers in ``(k_lo, k_hi)`` where ``omega(k) t`` is a multiple of 2 pi."""
    t = abs(t)
    if t == 0 or not math.isfinite(k_hi):
        return np.empty(0)
    w_lo, w_hi = dispersion.omega(k_lo), dispersion.omega(k_hi)
    j = np.arange(math.floor(w_lo * t / (2 * math.pi)) + 1,
                  math.ceil(w_hi * t / (2 * math.pi)))
    return dispersion.momentum(2 * math.pi * j / t)


class CouplingFunction:
    """Coupling ``lambda * F_k`` with ``F_k = F~(k) / sqrt(2 (2 pi)^n omega)``.

    Parameters
    ----------
    mode_space : ModeSpace
    profile : SpatialProfile
    lam : float
        Coupling strength.
    """

    def __init__(self, mode_space, profile, lam=1.0):
        if not math.isfinite(lam):
            raise DomainError("coupling strength must be finite")
        self.mode_space = mode_space
        self.profile = profile
        self.lam = float(lam)
        self._norm = 1.0 / math.sqrt(2.0 * (2 * math.pi) ** mode_space.n)

    def __repr__(self):
        return (f"CouplingFunction(n={self.mode_space.n}, mass={self.mode_space.dispersion.mass}, "
                f"profile={self.profile!r}, lam={self.lam})")

    @property
    def n(self):
        return self.mode_space.n

    @property
    def dispersion(self):
        return self.mode_space.dispersion

    @property
    def is_massless(self):
        return self.mode_space.dispersion.is_massless

    def with_lambda(self, lam):
        return CouplingFunction(self.mode_space, self.profile, lam)

    def scaled(self, factor):
        """Coupling multiplied by ``factor`` (``-1`` implements ``F -> -F``)."""
        return self.with_lambda(self.lam * factor)

    def values(self, k):
        """``lambda * F_k`` on an array of ``k > 0`` (no singular-point check)."""
        k = np.asarray(k, dtype=float)
        w = self.mode_space.omega(k)
        with np.errstate(divide="ignore"):
            return self.lam * self._norm * self.profile(k) / np.sqrt(w)

    def points(self, k):
        k = np.asarray(k, dtype=float)
        return ModePoints(k, self.mode_space.omega(k), self.values(k), np.ones_like(k))

    def effective_cutoff(self, rel=1e-18):
        """Wavenumber beyond which ``k^(n-1) F~(k)^2`` stays below ``rel`` of its peak."""
        end = self.profile.support_end
        if math.isfinite(end):
            return end
        lo, _ = self.profile.domain
        grid = self.profile.scale * np.logspace(-6, 8, 841)
        grid = grid[grid >= lo]
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            weight = grid ** (self.n - 1) * np.abs(self.profile(grid)) ** 2
        weight = np.nan_to_num(weight)
        peak = weight.max()
        if peak == 0:
            return float(grid[0])
        above = np.nonzero(weight > rel * peak)[0]
        # power-law tails never drop below rel within the grid; the caller
        # still integrates the remainder, only the breakpoint seeding stops
        return float(grid[min(above[-1] + 1, grid.size - 1)])

    def integrate(self, density, k_min=0.0, k_max=math.inf, *, time=None,
                  breakpoints=(), scale=None, rtol=quadrature.RTOL,
                  atol=quadrature.ATOL, max_panels=quadrature.MAX_PANELS):
        """Integrate ``density(points)`` against ``d^n k`` over a radial shell.

        ``time`` marks an integrand oscillating like ``exp(i omega t)``;
        panels are then seeded at every period up to the effective cutoff and
        the panel budget is raised to four panels per period.
        """
        lo, hi = self.profile.domain
        k_min = max(float(k_min), lo)
        k_max = min(float(k_max), hi, self.profile.support_end)
        if k_max <= k_min:
            return quadrature.QuadResult(0.0, 0.0, 0)
        area = sphere_area(self.n)
        power = self.n - 1

        def radial(k):
            pts = self.points(k)
            return density(pts) * (area * k**power)

        seeds = [*self.profile.breakpoints, *breakpoints]
        if time:
            cut = min(self.effective_cutoff(), k_max)
            periods = _period_breakpoints(self.dispersion, time, k_min, cut)
            seeds.extend(periods.tolist())
            max_panels = max(max_panels, 4 * len(seeds))
        return quadrature.integrate(radial, k_min, k_max, breakpoints=seeds, rtol=rtol,
                                    atol=atol, max_panels=max_panels,
                                    scale=self.profile.scale if scale is None else scale)


def coupling_value(coupling, k):
    """``lambda F~(k) / sqrt(2 (2 pi)^n omega(k))``.

    ``k = 0`` is a singular point for a massless field and raises
    :class:`SingularPointError`.
    """
    karr = np.asarray(k, dtype=float)
    if np.any(karr < 0) or np.any(~np.isfinite(karr)):
        raise DomainError("wavenumber must be finite and non-negative")
    if coupling.is_massless and np.any(karr == 0):
        raise SingularPointError("coupling is singular at k = 0 for a massless field")
    out = coupling.values(karr)
    return float(out) if out.ndim == 0 else out


class TestFunction:
    """Complex radial test function ``g_k`` on the one-particle space.

    Wraps a callable taking :class:`ModePoints` and returning complex values.
    Build one with :meth:`radial` (a function of ``k``), :meth:`discrete`
    (explicit per-mode values, already weight-absorbed) or :meth:`from_points`.

    ``oscillation`` is a time scale ``t`` such that the function oscillates
    at most like ``exp(i omega t)``; integrals use it to seed panels.
    """

    __test__ = False  # keep pytest from collecting this class

    def __init__(self, func, breakpoints=(), label="g", oscillation=0.0, is_zero=False):
        self._func = func
        self.breakpoints = tuple(breakpoints)
        self.label = label
        self.oscillation = float(oscillation)
        self.is_zero = is_zero

    def __repr__(self):
        return f"TestFunction({self.label})"

    def __call__(self, points):
        out = np.asarray(self._func(points), dtype=complex)
        return np.broadcast_to(out, points.k.shape)

    @classmethod
    def radial(cls, fn, *, breakpoints=(), label=None, mode_space=None):
        """Test function ``g(k) = fn(k)``; optionally verify its norm on ``mode_space``."""
        g = cls(lambda p: fn(p.k) * p.scale, breakpoints, label or getattr(fn, "__name__", "g"))
        if mode_space is not None:
            g.check_norm(CouplingFunction(mode_space, Gaussian(1.0), 0.0))
        return g

    @classmethod
    def discrete(cls, values, label="g"):
        vals = np.asarray(values, dtype=complex)

        def func(p):
            if p.k.shape != vals.shape:
                raise DomainError("discrete test function used with a mismatched mode set")
            return vals

        return cls(func, (), label, is_zero=not np.any(vals))

    @classmethod
    def from_points(cls, fn, breakpoints=(), label="g", oscillation=0.0):
        return cls(fn, breakpoints, label, oscillation)

    @classmethod
    def zero(cls):
        return cls(lambda p: np.zeros(p.k.shape, dtype=complex), (), "0", is_zero=True)

    def _combine(self, other, op, sym):
        if other.is_zero:
            return self if sym == "+" or sym == "-" else NotImplemented
        if self.is_zero:
            return other if sym == "+" else -other
        return TestFunction(lambda p: op(self(p), other(p)),
                            self.breakpoints + other.breakpoints,
                            f"({self.label} {sym} {other.label})",
                            max(self.oscillation, other.oscillation))

    def __add__(self, other):
        return self._combine(other, np.add, "+")

    def __sub__(self, other):
        return self._combine(other, np.subtract, "-")

    def __neg__(self):
        if self.is_zero:
            return self
        return TestFunction(lambda p: -self(p), self.breakpoints, f"-{self.label}",
                            self.oscillation)

    def __mul__(self, factor):
        factor = complex(factor)
        if self.is_zero or factor == 0:
            return TestFunction.zero()
        return TestFunction(lambda p: factor * self(p), self.breakpoints,
                            f"{factor:g}*{self.label}", self.oscillation)

    __rmul__ = __mul__

    def conj(self):
        return TestFunction(lambda p: np.conj(self(p)), self.breakpoints, f"conj({self.label})",
                            self.oscillation, self.is_zero)

    def rotated(self, t):
        """Free evolution ``g_k exp(i omega_k t)``."""
        t = float(t)
        if t == 0 or self.is_zero:
            return self
        return TestFunction(lambda p: self(p) * np.exp(1j * p.omega * t), self.breakpoints,
                            f"{self.label}@{t:g}", self.oscillation + abs(t))

    def norm_squared(self, space):
        """``int d^n k |g_k|^2`` over ``space`` (a coupling or a discrete mode set)."""
        if self.is_zero:
            return 0.0
        res = space.integrate(lambda p: np.abs(self(p)) ** 2, breakpoints=self.breakpoints,
                              time=2 * self.oscillation or None)
        return float(np.real(res.value))

    def check_norm(self, space):
        try:
            value = self.norm_squared(space)
        except QuadratureError as exc:
            raise DomainError(f"norm of test function {self.label} did not converge: {exc}") from exc
        if not math.isfinite(value):
            raise DomainError(f"test function {self.label} has infinite norm")
        return value


def inner_product(space, f, g):
    """``<f, g> = int d^n k conj(f_k) g_k`` (antilinear in the first slot)."""
    if f.is_zero or g.is_zero:
        return 0j
    res = space.integrate(lambda p: np.conj(f(p)) * g(p),
                          breakpoints=f.breakpoints + g.breakpoints,
                          time=(f.oscillation + g.oscillation) or None)
    return complex(res.value)
