"""Newtonian coupling between two uniform oblate spheroidal clouds.

Both clouds share the symmetry axis; the field cloud sits a distance ``d``
above the source cloud along that axis. Potentials use the positive kernel
∫ρ/|x − x′|, so an exterior potential tends to +Gm/ρ far away, and the
pairwise coupling λ′ = −½∫ρ_α Φ_β comes out negative.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import eval_legendre

from .constants import G

SPHERE_ELLIPTICITY = 1e-6
SERIES_SWITCH = 0.2  # use the multipole series when l/ρ is below this
SERIES_TERMS = 30
INSIDE_TOL = 1e-12
MIN_REL_TOL = 1e-13


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, estimate: float, error: float, evals: int):
        super().__init__(f"{message} (estimate {estimate!r}, error {error!r}, {evals} evaluations)")
        self.estimate = estimate
        self.error = error
        self.evals = evals


@dataclass(frozen=True)
class SpheroidGeometry:
    """Two identical oblate clouds, semi-axes ``a`` (equatorial) ≥ ``c`` (polar), centres ``d`` apart."""

    a: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.c > 0 and np.isfinite(self.a) and np.isfinite(self.c)):
            raise ValueError(f"polar radius c must be positive, got {self.c!r}")
        if self.a < self.c:
            raise ValueError(f"prolate clouds are not supported: a={self.a!r} < c={self.c!r}")
        if not self.d >= 2 * self.c * (1 - 1e-12):
            raise ValueError(f"clouds overlap: d={self.d!r} < 2c={2 * self.c!r}")

    @property
    def focal_distance(self) -> float:
        return math.sqrt(max(self.a * self.a - self.c * self.c, 0.0))

    @property
    def ellipticity(self) -> float:
        return self.focal_distance / self.a

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.a**2 * self.c

    @property
    def equivalent_radius(self) -> float:
        return (self.a**2 * self.c) ** (1.0 / 3.0)

    @classmethod
    def sphere(cls, radius: float, d: float) -> "SpheroidGeometry":
        return cls(radius, radius, d)

    @classmethod
    def from_volume(cls, volume: float, ellipticity: float, d_over_c: float = 2.0) -> "SpheroidGeometry":
        if not 0 <= ellipticity < 1:
            raise ValueError(f"ellipticity must lie in [0, 1), got {ellipticity!r}")
        radius = (3 * volume / (4 * math.pi)) ** (1.0 / 3.0)
        q = math.sqrt(1 - ellipticity**2)
        a = radius * q ** (-1.0 / 3.0)
        c = a * q
        return cls(a, c, d_over_c * c)


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 0.0
    rel_tol: float = 1e-8
    max_evals: int = 10_000_000

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol <= 0 or (self.abs_tol == 0 and self.rel_tol == 0):
            raise ValueError("quadrature tolerances must be non-negative with at least one positive")
        if self.abs_tol == 0 and self.rel_tol < MIN_REL_TOL:
            # the inner integral runs at rel_tol/10, and QUADPACK refuses below 50 machine epsilons
            raise ValueError(f"rel_tol must be at least {MIN_REL_TOL:g} when abs_tol is 0, got {self.rel_tol!r}")
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")


@dataclass(frozen=True)
class CouplingResult:
    value: float  # J; negative
    error: float  # absolute error estimate, J
    evals: int

    @property
    def magnitude(self) -> float:
        return abs(self.value)


# --- exterior potential -----------------------------------------------------


def _multipole(r: float, z: float, l: float) -> float:
    # per unit G·m; exterior expansion in (l/ρ)² with Legendre P_2n(cos θ)
    rho = math.hypot(r, z)
    t = (l / rho) ** 2
    cos_t = z / rho
    total = 0.0
    tn = 1.0
    for n in range(SERIES_TERMS):
        term = (-1) ** n * 3.0 * tn / ((2 * n + 1) * (2 * n + 3)) * eval_legendre(2 * n, cos_t)
        total += term
        tn *= t
        if tn < 1e-18:
            break
    return total / rho


def _closed_form(r: float, z: float, l: float) -> float:
    r2, z2, l2 = r * r, z * z, l * l
    A = r2 + z2 + math.sqrt(z2 * z2 + 2 * z2 * (r2 + l2) + (l2 - r2) ** 2)
    B2 = A + l2
    C = r2 + 2 * z2
    D = r2 - 2 * z2
    E = math.sqrt(A - l2)
    return 3.0 / (4.0 * l**3) * (
        (2 * l2 - D) * math.asin(math.sqrt(2) * l / math.sqrt(B2)) + math.sqrt(2) * l * (A * D - l2 * C) / (E * B2)
    )


def unit_potential(r: float, z: float, a: float, c: float) -> float:
    """Exterior potential per unit G·m of a uniform oblate spheroid at the origin."""
    if r * r / (a * a) + z * z / (c * c) < 1 - INSIDE_TOL:
        raise ValueError(f"point (r={r!r}, z={z!r}) lies inside the spheroid")
    rho = math.hypot(r, z)
    l = math.sqrt(max(a * a - c * c, 0.0))
    if l / a < SPHERE_ELLIPTICITY:
        return 1.0 / rho
    if l / rho < SERIES_SWITCH:
        return _multipole(r, z, l)
    # outside the body A − l² ≥ 2c² > 0, so the focal-ring singularity E = 0 is never reached
    return _closed_form(r, z, l)


def oblate_external_potential(r: float, z: float, m_src: float, a: float, c: float, grav: float = G) -> float:
    """Φ = G·m·(unit potential) at cylindrical (r, z); positive, → Gm/ρ far away."""
    if a < c:
        raise ValueError(f"prolate source not supported: a={a!r} < c={c!r}")
    return grav * m_src * unit_potential(r, z, a, c)


# --- couplings --------------------------------------------------------------


def _overlap_integral(
    src_a: float, src_c: float, fld_a: float, fld_c: float, d: float, quad: QuadratureSpec
) -> tuple[float, float, int]:
    """Mean over the field body of the unit source potential, with its error and eval count.

    Field points are z = d + c u, r = a √(1 − u²) s, with weight (1 − u²) s
    normalised to 3/2 · ∫∫.
    """
    evals = 0
    inner_err = 0.0

    def f(s, u):
        nonlocal evals
        evals += 1
        return (1 - u * u) * s * unit_potential(fld_a * math.sqrt(max(1 - u * u, 0.0)) * s, d + fld_c * u, src_a, src_c)

    def inner(u):
        nonlocal inner_err
        val, err = integrate.quad(f, 0.0, 1.0, args=(u,), epsabs=quad.abs_tol, epsrel=quad.rel_tol / 10, limit=200)
        inner_err = max(inner_err, err)
        if evals > quad.max_evals:
            raise QuadratureError("evaluation budget exhausted", math.nan, math.inf, evals)
        return val

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(inner, -1.0, 1.0, epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge: {exc}", math.nan, math.inf, evals) from None
    total_err = err + 2.0 * inner_err
    return 1.5 * val, 1.5 * total_err, evals


def pair_coupling(
    m_source: float,
    source: tuple[float, float],
    m_field: float,
    field: tuple[float, float],
    d: float,
    quad: QuadratureSpec = QuadratureSpec(),
    grav: float = G,
) -> CouplingResult:
    """λ′ = −½ ∫ρ_field Φ_source for two coaxial spheroids with given (a, c)."""
    (sa, sc), (fa, fc) = source, field
    if d < (sc + fc) * (1 - 1e-12):
        raise ValueError(f"clouds overlap: d={d!r} < c_source + c_field = {sc + fc!r}")
    mean, err, evals = _overlap_integral(sa, sc, fa, fc, d, quad)
    scale = -0.5 * grav * m_source * m_field
    return CouplingResult(scale * mean, abs(scale) * err, evals)


def cross_coupling(m_atom: float, geom: SpheroidGeometry, quad: QuadratureSpec = QuadratureSpec(), grav: float = G) -> CouplingResult:
    """Per-atom-pair coupling between the two identical clouds (negative, J)."""
    if not m_atom > 0:
        raise ValueError(f"atom mass must be positive, got {m_atom!r}")
    return pair_coupling(m_atom, (geom.a, geom.c), m_atom, (geom.a, geom.c), geom.d, quad, grav)


def _asin_over_x(e: float) -> float:
    if e < 1e-4:
        return 1 + e * e / 6 + 3 * e**4 / 40
    return math.asin(e) / e


def self_coupling(m_atom: float, a: float, c: float, grav: float = G) -> float:
    """Self coupling −(3Gm²/5l)·asin(e) of one uniform spheroid (negative, J)."""
    if a < c or c <= 0:
        raise ValueError(f"need a >= c > 0, got a={a!r}, c={c!r}")
    e = math.sqrt(max(a * a - c * c, 0.0)) / a
    # asin(e)/l = asin(e)/(e a), finite as e → 0
    return -3 * grav * m_atom**2 / (5 * a) * _asin_over_x(e)


def enhancement_factor(
    m_atom: float, geom: SpheroidGeometry, reference: str = "touching", quad: QuadratureSpec = QuadratureSpec()
) -> float:
    """Cross coupling relative to equal-volume spheres.

    ``reference="touching"`` places the spheres at the same d/c ratio as the
    spheroids (touching spheres when d = 2c); ``"same-distance"`` keeps the
    centre separation.
    """
    lam = cross_coupling(m_atom, geom, quad).value
    if reference == "touching":
        d_ref = geom.d / geom.c * geom.equivalent_radius
    elif reference == "same-distance":
        d_ref = geom.d
    else:
        raise ValueError(f"unknown reference {reference!r} (use 'touching' or 'same-distance')")
    return lam / (-G * m_atom**2 / (2 * d_ref))


@dataclass(frozen=True)
class OptimumResult:
    ellipticity: float
    enhancement: float
    coupling: float  # J


def optimal_ellipticity(
    d_over_c: float, volume: float, m_atom: float, quad: QuadratureSpec = QuadratureSpec(), upper: float = 0.999
) -> OptimumResult:
    """Ellipticity maximising |λ′| at fixed volume and fixed d/c."""
    if not d_over_c >= 2:
        raise ValueError(f"d/c must be at least 2, got {d_over_c!r}")

    def objective(e):
        geom = SpheroidGeometry.from_volume(volume, e, d_over_c)
        return cross_coupling(m_atom, geom, quad).value  # negative; minimise

    res = optimize.minimize_scalar(objective, bounds=(0.0, upper), method="bounded", options={"xatol": 1e-5})
    geom = SpheroidGeometry.from_volume(volume, float(res.x), d_over_c)
    lam = float(res.fun)
    d_ref = d_over_c * geom.equivalent_radius
    return OptimumResult(float(res.x), lam / (-G * m_atom**2 / (2 * d_ref)), lam)
