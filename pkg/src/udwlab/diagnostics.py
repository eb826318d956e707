"""Divergence integrals ``R_j``, finite/divergent verdicts and model classification.

``R_j^Lambda = int_Lambda d^n k |lambda F_k|^2 / omega_k^j``.  Finite values
come from adaptive quadrature; divergence is only ever declared from a fitted
endpoint power law, never from a quadrature failure.
"""

from dataclasses import dataclass, field
import enum
import json
import math

import numpy as np

from . import quadrature
from .errors import (
    InconclusiveError,
    InfiniteSoftBosonsError,
    QuadratureError,
    UDWError,
    UnboundedBelowError,
)

DEFAULT_OMEGA0 = 1.0
FIT_WINDOWS = 12
FIT_SHIFT = 4
FIT_MAX_START = 40
FIT_RESIDUAL = 2e-3
DIVERGENCE_SLACK = 0.02
MIN_TABLE_WINDOWS = 4


class End(enum.Enum):
    IR = "IR"
    UV = "UV"


class RegionKind(enum.Enum):
    INFRARED = "Infrared"
    ULTRAVIOLET = "Ultraviolet"
    FULL = "Full"


@dataclass(frozen=True)
class Region:
    """Momentum region split at ``omega(k) = omega0``."""

    kind: RegionKind = RegionKind.FULL
    omega0: float = DEFAULT_OMEGA0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("split frequency omega0 must be positive")

    @classmethod
    def infrared(cls, omega0=DEFAULT_OMEGA0):
        return cls(RegionKind.INFRARED, omega0)

    @classmethod
    def ultraviolet(cls, omega0=DEFAULT_OMEGA0):
        return cls(RegionKind.ULTRAVIOLET, omega0)

    @classmethod
    def full(cls, omega0=DEFAULT_OMEGA0):
        return cls(RegionKind.FULL, omega0)

    def split(self, dispersion):
        return float(dispersion.momentum(self.omega0))

    def k_bounds(self, dispersion):
        k0 = self.split(dispersion)
        if self.kind is RegionKind.INFRARED:
            return 0.0, k0
        if self.kind is RegionKind.ULTRAVIOLET:
            return k0, math.inf
        return 0.0, math.inf


@dataclass(frozen=True)
class Finite:
    value: float
    error_estimate: float = 0.0

    is_finite = True

    def to_dict(self):
        return {"verdict": "Finite", "value": self.value, "error_estimate": self.error_estimate}


@dataclass(frozen=True)
class Divergent:
    end: End
    local_exponent: float

    is_finite = False

    def to_dict(self):
        return {"verdict": "Divergent", "end": self.end.value,
                "local_exponent": self.local_exponent}


class Classification(enum.Enum):
    UV_SINGULAR = "UvSingular"
    UNBOUNDED_BELOW = "UnboundedBelow"
    BOUNDED_BELOW_NON_FOCK = "BoundedBelowNonFock"
    FOCK_REGULAR = "FockRegular"


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares power law over dyadic windows."""

    exponent: float
    residual: float
    k_low: float
    k_high: float

    def diverges(self):
        return self.exponent <= -1.0 + DIVERGENCE_SLACK


def _window_means(h, lo, hi):
    val, _ = quadrature._panel_rule(h, lo, hi)
    return np.real(val) / (hi - lo)


def _fit(h, lo, hi):
    means = _window_means(h, lo, hi)
    centre = np.log(np.sqrt(lo * hi))
    if np.any(~np.isfinite(means)) or np.any(means <= 0):
        return None, means
    y = np.log(means)
    slope, icpt = np.polyfit(centre, y, 1)
    resid = float(np.max(np.abs(y - (slope * centre + icpt))))
    return ExponentFit(float(slope), resid, float(lo.min()), float(hi.max())), means


def fit_ir_exponent(h, k_top, *, windows=FIT_WINDOWS, residual=FIT_RESIDUAL):
    """Power ``p`` of ``h(k) ~ k^p`` as ``k -> 0``.

    Windows ``[2^(-m-1) k_top, 2^-m k_top]`` for ``m = m0 .. m0 + windows - 1``
    are fitted; when the residual is too large the block moves ``FIT_SHIFT``
    octaves deeper, up to ``m0 = FIT_MAX_START``.
    """
    info = []
    for m0 in range(0, FIT_MAX_START + 1, FIT_SHIFT):
        m = np.arange(m0, m0 + windows, dtype=float)
        hi = k_top * 2.0**-m
        fit, means = _fit(h, hi / 2, hi)
        if fit is None:
            if np.all(means == 0):
                # identically zero near the origin: no infrared contribution
                return ExponentFit(math.inf, 0.0, float(hi.min() / 2), float(hi.max()))
            info.append({"m0": m0, "reason": "non-positive window mean"})
            continue
        if fit.residual <= residual:
            return fit
        info.append({"m0": m0, "exponent": fit.exponent, "residual": fit.residual})
    raise InconclusiveError("infrared behaviour is not a power law within the fit window",
                            {"fits": info, "k_top": k_top})


def _fit_table(h, k_lo, k_hi, end, residual=FIT_RESIDUAL):
    octaves = int(math.floor(math.log2(k_hi / k_lo)))
    count = min(FIT_WINDOWS, octaves)
    if count < MIN_TABLE_WINDOWS:
        raise InconclusiveError(
            f"tabulated range spans {octaves} octaves; need {MIN_TABLE_WINDOWS} for a {end.value} fit",
            {"k_lo": k_lo, "k_hi": k_hi})
    m = np.arange(count, dtype=float)
    if end is End.IR:
        lo = k_lo * 2.0**m
        hi = lo * 2
    else:
        hi = k_hi * 2.0**-m
        lo = hi / 2
    fit, means = _fit(h, lo, hi)
    if fit is None or fit.residual > residual:
        raise InconclusiveError(
            f"tabulated profile is not a power law near the {end.value} end",
            {"means": means.tolist(), "fit": None if fit is None else fit.__dict__})
    return fit


def _radial_integrand(coupling, j):
    def h(k):
        pts = coupling.points(k)
        return np.abs(pts.coupling) ** 2 * k ** (coupling.n - 1) / pts.omega**j
    return h


def _ir_top(coupling, omega0):
    prof = coupling.profile
    top = min(omega0, prof.scale)
    if math.isfinite(prof.support_end):
        top = min(top, prof.support_end / 2)
    return top


def ir_fit(coupling, j, omega0=DEFAULT_OMEGA0):
    """Fitted infrared exponent of ``k^(n-1) |lambda F_k|^2 / omega^j``."""
    h = _radial_integrand(coupling.with_lambda(1.0), j)
    lo, hi = coupling.profile.domain
    if lo > 0:
        return _fit_table(h, lo, hi, End.IR)
    return fit_ir_exponent(h, _ir_top(coupling, omega0))


def ir_verdict(coupling, j, omega0=DEFAULT_OMEGA0):
    """Infrared verdict for ``R_j`` from the dyadic power-law fit.

    Returns ``Divergent(IR, p)`` when the fitted exponent is at most
    ``-1 + 0.02`` and ``Finite`` otherwise.  A ``Finite`` verdict carries
    no value here; use :func:`r_integral` for the number.
    """
    if coupling.lam == 0:
        return Finite(0.0, 0.0)
    fit = ir_fit(coupling, j, omega0)
    if fit.diverges():
        return Divergent(End.IR, fit.exponent)
    return Finite(math.nan, math.nan)


def uv_exponent(coupling, j):
    """Large-k exponent of the radial ``R_j`` integrand (``-inf`` for fast decay)."""
    prof = coupling.profile
    if math.isfinite(prof.support_end) and prof.domain[1] == math.inf:
        return -math.inf
    if prof.uv_exponent is not None:
        return coupling.n - 2 - j + 2 * prof.uv_exponent
    lo, hi = prof.domain
    return _fit_table(_radial_integrand(coupling.with_lambda(1.0), j), lo, hi, End.UV).exponent


def uv_verdict(coupling, j):
    if coupling.lam == 0:
        return Finite(0.0, 0.0)
    p = uv_exponent(coupling, j)
    if p >= -1.0 - DIVERGENCE_SLACK:
        return Divergent(End.UV, p)
    return Finite(math.nan, math.nan)


def _quadrature(coupling, j, k_lo, k_hi, omega0):
    def density(p):
        return np.abs(p.coupling) ** 2 / p.omega**j
    try:
        return coupling.integrate(density, k_lo, k_hi, scale=omega0)
    except QuadratureError as exc:
        raise InconclusiveError(
            f"R_{j} quadrature did not converge on [{k_lo:g}, {k_hi:g}]",
            {"estimate": exc.value, "error": exc.error, "panels": exc.panels}) from exc


def r_integral(coupling, j, region=None):
    """``R_j`` of ``coupling`` over ``region`` (default: full space, ``omega0 = 1``).

    The full-space value is the sum of the infrared and ultraviolet pieces,
    so region additivity holds exactly.
    """
    region = region or Region.full()
    if coupling.lam == 0:
        return Finite(0.0, 0.0)
    k_lo, k_hi = region.k_bounds(coupling.dispersion)
    if k_hi == math.inf:
        uv = uv_verdict(coupling, j)
        if not uv.is_finite:
            return uv
    if k_lo == 0 and k_hi > 0:
        ir = ir_verdict(coupling, j, region.omega0)
        if not ir.is_finite:
            return ir
    if region.kind is RegionKind.FULL:
        split = region.split(coupling.dispersion)
        pieces = [_quadrature(coupling, j, 0.0, split, region.omega0),
                  _quadrature(coupling, j, split, math.inf, region.omega0)]
    else:
        pieces = [_quadrature(coupling, j, k_lo, k_hi, region.omega0)]
    value = sum(float(np.real(p.value)) for p in pieces)
    error = sum(p.error for p in pieces)
    return Finite(value, error)


@dataclass
class DiagnosticsReport:
    r0: object
    r1: object
    r2: object
    classification: Classification
    ground_energy: float | None
    mean_soft_bosons: float | None
    omega0: float = DEFAULT_OMEGA0
    delta: float = 0.0
    degenerate_ground: bool | None = None
    ir_exponents: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "r0": self.r0.to_dict(),
            "r1": self.r1.to_dict(),
            "r2": self.r2.to_dict(),
            "classification": self.classification.value,
            "ground_energy": self.ground_energy,
            "mean_soft_bosons": self.mean_soft_bosons,
            "omega0": self.omega0,
            "delta": self.delta,
            "degenerate_ground": self.degenerate_ground,
            "ir_exponents": self.ir_exponents,
            "tolerances": {
                "rtol": quadrature.RTOL,
                "atol": quadrature.ATOL,
                "max_panels": quadrature.MAX_PANELS,
                "fit_windows": FIT_WINDOWS,
                "fit_residual": FIT_RESIDUAL,
                "divergence_threshold": -1.0 + DIVERGENCE_SLACK,
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _classify_verdicts(r0, r1, r2):
    if not r0.is_finite and r0.end is End.UV:
        return Classification.UV_SINGULAR
    if not r1.is_finite:
        return Classification.UNBOUNDED_BELOW
    if not r2.is_finite:
        return Classification.BOUNDED_BELOW_NON_FOCK
    return Classification.FOCK_REGULAR


def _check_chain(coupling, omega0):
    """Removing a power of ``1/omega`` never worsens the IR nor improves the UV."""
    ir = [ir_verdict(coupling, j, omega0).is_finite for j in range(3)]
    uv = [uv_verdict(coupling, j).is_finite for j in range(3)]
    for j in range(2):
        if ir[j + 1] and not ir[j]:
            raise UDWError(f"internal error: R_{j + 1} IR-finite but R_{j} IR-divergent")
        if uv[j] and not uv[j + 1]:
            raise UDWError(f"internal error: R_{j} UV-finite but R_{j + 1} UV-divergent")


def classify(coupling, delta=0.0, omega0=DEFAULT_OMEGA0):
    """Full diagnostics report: ``R_0, R_1, R_2``, classification, ``E_0`` and soft bosons."""
    region = Region.full(omega0)
    r0, r1, r2 = (r_integral(coupling, j, region) for j in range(3))
    exps = {}
    if coupling.lam != 0:
        _check_chain(coupling, omega0)
        for j in range(3):
            exps[f"r{j}"] = ir_fit(coupling, j, omega0).exponent
    cls = _classify_verdicts(r0, r1, r2)
    energy = -r1.value - abs(delta) if r1.is_finite else None
    return DiagnosticsReport(
        r0=r0, r1=r1, r2=r2, classification=cls, ground_energy=energy,
        mean_soft_bosons=r2.value if r2.is_finite else None,
        omega0=omega0, delta=float(delta),
        degenerate_ground=(delta == 0) if energy is not None else None,
        ir_exponents=exps)


def ground_energy(coupling, delta=0.0, omega0=DEFAULT_OMEGA0):
    """Ground-state energy ``-R_1 - |delta|``; raises if ``R_1`` diverges."""
    r1 = r_integral(coupling, 1, Region.full(omega0))
    if not r1.is_finite:
        raise UnboundedBelowError(
            f"R_1 diverges at the {r1.end.value} end (exponent {r1.local_exponent:.3f}); "
            "the Hamiltonian is unbounded below",
            end=r1.end.value, exponent=r1.local_exponent)
    return -r1.value - abs(delta)


def poisson_pmf(mean, count):
    """``mean^N e^-mean / N!`` evaluated in log space."""
    if mean < 0 or int(count) != count or count < 0:
        raise ValueError("need mean >= 0 and a non-negative integer count")
    if mean == 0:
        return 1.0 if count == 0 else 0.0
    return math.exp(count * math.log(mean) - mean - math.lgamma(count + 1))


def soft_boson_mean(coupling, region=None):
    """Mean soft-boson number ``R_2`` on ``region``; raises if it diverges."""
    r2 = r_integral(coupling, 2, region)
    if not r2.is_finite:
        raise InfiniteSoftBosonsError(
            f"R_2 diverges at the {r2.end.value} end: infinitely many soft bosons",
            end=r2.end.value, exponent=r2.local_exponent)
    return r2.value


def boson_pmf(coupling, region, count):
    """Probability of ``count`` bosons in ``region`` for the dressed ground state."""
    return poisson_pmf(soft_boson_mean(coupling, region), count)


def van_hove_conditions(source, omega0=DEFAULT_OMEGA0):
    """Van Hove existence conditions for a static source ``z_k`` (``source.lam`` = 1).

    ``first_type``: ``R_0`` IR-finite and ``R_2`` UV-finite.
    ``second_type``: ``R_1`` IR-finite and ``R_2`` UV-finite.
    """
    ir0 = r_integral(source, 0, Region.infrared(omega0)).is_finite
    ir1 = r_integral(source, 1, Region.infrared(omega0)).is_finite
    uv2 = r_integral(source, 2, Region.ultraviolet(omega0)).is_finite
    return {"first_type": ir0 and uv2, "second_type": ir1 and uv2}


__all__ = [
    "DEFAULT_OMEGA0", "End", "Region", "RegionKind", "Finite", "Divergent",
    "Classification", "ExponentFit", "DiagnosticsReport", "fit_ir_exponent",
    "ir_fit", "ir_verdict", "uv_exponent", "uv_verdict", "r_integral", "classify",
    "ground_energy", "poisson_pmf", "soft_boson_mean", "boson_pmf",
    "van_hove_conditions",
]
