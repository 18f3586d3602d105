"""From a physical experiment description to dimensionless couplings and SNR.

Couplings carry their sign: gravitational λ′ are negative and the
dimensionless phases are λ = 2λ′t/ħ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

from numpy import pi
from scipy.integrate import solve_ivp

from . import analytic as an
from .constants import BOHR_RADIUS, CM3_PER_M3, CM6_TO_M6, ERBIUM, HBAR, Species
from .oracle import PhaseConfig
from .spheroid import QuadratureSpec, SpheroidGeometry, cross_coupling, self_coupling

SCHEMES = ("one-open", "both-closed")
PERTURBATIVE_LIMIT = 0.1
DENSITY_CAP_CM3 = 1e16


def optimal_phases(scheme: str) -> PhaseConfig:
    """Phases maximising the leading-order SNR of each scheme."""
    if scheme == "one-open":
        return PhaseConfig(phi=0.0, phi_prime=0.0, varphi=-pi / 2, varphi_prime=0.0)
    if scheme == "both-closed":
        return PhaseConfig()
    raise ValueError(f"unknown scheme {scheme!r} (use one of {', '.join(SCHEMES)})")


@dataclass(frozen=True)
class ExperimentConfig:
    species: Species
    n_atoms: int
    geom: SpheroidGeometry
    time_s: float
    reps: float
    setups: int = 1
    squeeze_db: float = 0.0
    scattering_length_m: float = 0.0
    phases: PhaseConfig | None = None
    scheme: str = "one-open"
    kappa_intra_j: float = 0.0  # cross-arm EM coupling within one interferometer
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if not self.n_atoms >= 1:
            raise ValueError(f"atoms: need at least one atom, got {self.n_atoms!r}")
        if not self.time_s > 0:
            raise ValueError(f"time_s: must be positive, got {self.time_s!r}")
        if not self.reps >= 2:
            raise ValueError(f"reps: need at least 2 repetitions, got {self.reps!r}")
        if int(self.setups) != self.setups or self.setups < 1:
            raise ValueError(f"setups: must be a positive integer, got {self.setups!r}")
        if not self.squeeze_db >= 0:
            raise ValueError(f"squeeze_db: must be non-negative, got {self.squeeze_db!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme: unknown scheme {self.scheme!r} (use one of {', '.join(SCHEMES)})")
        if self.phases is None:
            object.__setattr__(self, "phases", optimal_phases(self.scheme))

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class CouplingSet:
    """Dimensional couplings (J) and the interaction time that makes them phases."""

    lambda_cross_j: float
    lambda_self_j: float
    kappa_self_j: float
    kappa_intra_j: float
    time_s: float

    def _phase(self, energy: float) -> float:
        return 2 * energy * self.time_s / HBAR

    @property
    def cross(self) -> float:
        return self._phase(self.lambda_cross_j)

    @property
    def self_gravity(self) -> float:
        return self._phase(self.lambda_self_j)

    @property
    def kappa_s(self) -> float:
        return self._phase(self.kappa_self_j)

    @property
    def kappa_d(self) -> float:
        return self._phase(self.kappa_intra_j)

    @property
    def gamma(self) -> float:
        return self.self_gravity + self.kappa_s - self.kappa_d


def contact_coupling(scattering_length_m: float, atom_mass: float, geom: SpheroidGeometry) -> float:
    """Single-mode s-wave self coupling g/(2V) with g = 4πħ²a_s/m (J)."""
    g = 4 * pi * HBAR**2 * scattering_length_m / atom_mass
    return g / (2 * geom.volume)


@lru_cache(maxsize=4096)
def _scaled_cross(a_over_d: float, c_over_d: float, rel_tol: float, abs_tol: float, max_evals: int) -> float:
    # λ′·d/(G m²) depends only on the shape ratios, so it is cached by them
    geom = SpheroidGeometry(a_over_d, c_over_d, 1.0)
    return cross_coupling(1.0, geom, QuadratureSpec(abs_tol, rel_tol, max_evals), grav=1.0).value


def cached_cross_coupling(atom_mass: float, geom: SpheroidGeometry, quad: QuadratureSpec = QuadratureSpec()) -> float:
    from .constants import G

    unit = _scaled_cross(geom.a / geom.d, geom.c / geom.d, quad.rel_tol, quad.abs_tol, quad.max_evals)
    return unit * G * atom_mass**2 / geom.d


def dimensionless_couplings(cfg: ExperimentConfig) -> CouplingSet:
    m = cfg.species.atom_mass
    return CouplingSet(
        lambda_cross_j=cached_cross_coupling(m, cfg.geom, cfg.quad),
        lambda_self_j=self_coupling(m, cfg.geom.a, cfg.geom.c),
        kappa_self_j=contact_coupling(cfg.scattering_length_m, m, cfg.geom),
        kappa_intra_j=cfg.kappa_intra_j,
        time_s=cfg.time_s,
    )


def squeezing_gain(squeeze_db: float) -> float:
    """SNR multiplier 10^(dB/10) from lowering both spin variances by that factor."""
    if not squeeze_db >= 0:
        raise ValueError(f"squeezing must be non-negative dB, got {squeeze_db!r}")
    return 10.0 ** (squeeze_db / 10.0)


def effective_snr(cfg: ExperimentConfig, couplings: CouplingSet | None = None) -> an.SnrReport:
    """SNR of the whole campaign: M·setups repetitions, times the squeezing gain."""
    cs = couplings if couplings is not None else dimensionless_couplings(cfg)
    reps = cfg.reps * cfg.setups
    ph = cfg.phases
    if cfg.scheme == "one-open":
        base = an.snr_open(an.OpenSchemeParams(cfg.n_atoms, cs.gamma, cs.cross, ph.delta_open, reps))
    else:
        base = an.snr_closed(an.ClosedSchemeParams(cfg.n_atoms, cs.gamma, cs.cross, ph.mu, ph.nu, reps))
    gain = squeezing_gain(cfg.squeeze_db)
    level = abs(cs.cross) * cfg.n_atoms * gain
    diag = dict(base.diagnostics)
    diag.update(
        squeezing_gain=gain,
        effective_reps=reps,
        perturbative_level=level,
        perturbative_ok=level < PERTURBATIVE_LIMIT,
    )
    return an.SnrReport(base.signal, base.variance / gain**2, base.snr * gain, base.regime, diag)


def number_density(n_atoms: float, geom: SpheroidGeometry) -> float:
    """Mean number density in cm⁻³."""
    return n_atoms / geom.volume / CM3_PER_M3


def three_body_lifetime(n0_cm3: float, loss_cm6_s: float, decay_factor: float = 10.0) -> float:
    """Time for dn/dt = −L n³ to lower the density by ``decay_factor``: (f² − 1)/(2 L n0²)."""
    if not n0_cm3 > 0:
        raise ValueError(f"initial density must be positive, got {n0_cm3!r}")
    if not loss_cm6_s > 0:
        raise ValueError(f"loss coefficient must be positive, got {loss_cm6_s!r}")
    if not decay_factor >= 1:
        raise ValueError(f"decay factor must be at least 1, got {decay_factor!r}")
    return (decay_factor**2 - 1) / (2 * loss_cm6_s * n0_cm3**2)


def three_body_lifetime_numeric(n0_cm3: float, loss_cm6_s: float, decay_factor: float = 10.0) -> float:
    """Same time found by integrating dn/dt = −L n³ until n = n0/f."""
    scale = loss_cm6_s * n0_cm3**2  # fixes the time unit, 1/(L n0²)

    def rhs(_, y):
        return [-(y[0] ** 3)]

    def hit(_, y):
        return y[0] - 1.0 / decay_factor

    hit.terminal = True
    horizon = 10 * (decay_factor**2) / 2
    sol = solve_ivp(rhs, (0.0, horizon), [1.0], events=hit, rtol=1e-10, atol=1e-14, method="DOP853")
    if not sol.t_events[0].size:
        raise ArithmeticError("density never reached the target")
    return float(sol.t_events[0][0]) / scale


def config_lifetime(cfg: ExperimentConfig, decay_factor: float = 10.0) -> float:
    if cfg.species.loss_coefficient is None:
        return math.inf
    n0 = number_density(cfg.n_atoms, cfg.geom)
    if n0 == 0:
        return math.inf
    return three_body_lifetime(n0, cfg.species.loss_coefficient / CM6_TO_M6, decay_factor)


def scattering_suppression(cfg: ExperimentConfig, noise_ratio_threshold: float = 1e4) -> float:
    """Orders of magnitude a_s must drop below the Bohr radius to keep κ′ < threshold·|λ′|."""
    kappa = contact_coupling(BOHR_RADIUS, cfg.species.atom_mass, cfg.geom)
    lam = abs(cached_cross_coupling(cfg.species.atom_mass, cfg.geom, cfg.quad))
    return math.log10(kappa / (noise_ratio_threshold * lam))


def suppression_orders(kappa_j: float, lambda_j: float, noise_ratio_threshold: float) -> float:
    return math.log10(abs(kappa_j) / (noise_ratio_threshold * abs(lambda_j)))


# --- presets -----------------------------------------------------------------


def geometry_for_density(n_atoms: float, density_cm3: float, ellipticity: float, d_over_c: float = 2.0) -> SpheroidGeometry:
    volume = n_atoms / (density_cm3 * CM3_PER_M3)
    return SpheroidGeometry.from_volume(volume, ellipticity, d_over_c)


def headline_config() -> ExperimentConfig:
    """Unsqueezed example: 1e16 erbium atoms at 1e12 cm⁻³ in touching e = 0.98 clouds."""
    n = 10**16
    return ExperimentConfig(
        species=ERBIUM,
        n_atoms=n,
        geom=geometry_for_density(n, 1e12, 0.98),
        time_s=1e4,
        reps=1e3,
        setups=10,
    )


@dataclass(frozen=True)
class HeadlineReport:
    config: ExperimentConfig
    couplings: CouplingSet
    density_cm3: float
    lifetime_s: float
    snr: an.SnrReport
    suppression_orders: float

    def as_dict(self) -> dict:
        c, cs, g = self.config, self.couplings, self.config.geom
        return {
            "species": c.species.name,
            "atoms": c.n_atoms,
            "a_m": g.a,
            "c_m": g.c,
            "d_m": g.d,
            "ellipticity": g.ellipticity,
            "cross_coupling_j": cs.lambda_cross_j,
            "self_coupling_j": cs.lambda_self_j,
            "lambda": cs.cross,
            "gamma": cs.gamma,
            "density_cm3": self.density_cm3,
            "lifetime_s": self.lifetime_s,
            "time_s": c.time_s,
            "reps": c.reps,
            "setups": c.setups,
            "squeeze_db": c.squeeze_db,
            "snr": self.snr.snr,
            "snr_ratio_to_one": self.snr.snr / 1.0,
            "suppression_orders": self.suppression_orders,
        }

    def lines(self) -> list[str]:
        c, cs, g = self.config, self.couplings, self.config.geom
        return [
            f"species            {c.species.name}",
            f"atoms              {c.n_atoms:.6g}",
            f"a, c, d (m)        {g.a:.6g}, {g.c:.6g}, {g.d:.6g} (e = {g.ellipticity:.4f})",
            f"cross coupling     {cs.lambda_cross_j:.6e} J",
            f"self coupling      {cs.lambda_self_j:.6e} J",
            f"lambda             {cs.cross:.6e}",
            f"gamma              {cs.gamma:.6e}",
            f"lambda*N           {cs.cross * c.n_atoms:.6e}",
            f"density            {self.density_cm3:.6e} cm^-3",
            f"3-body lifetime    {self.lifetime_s:.6e} s (time {c.time_s:.3g} s)",
            f"repetitions        {c.reps:.6g} x {c.setups} setups",
            f"squeezing          {c.squeeze_db:g} dB",
            f"SNR                {self.snr.snr:.6e}",
            f"SNR / 1            {self.snr.snr:.6e} ({'meets' if self.snr.snr >= 1 else 'below'} order-1 target)",
            f"a_s suppression    {self.suppression_orders:.3f} orders below a0",
        ]


def headline_report(cfg: ExperimentConfig | None = None) -> HeadlineReport:
    cfg = cfg or headline_config()
    cs = dimensionless_couplings(cfg)
    return HeadlineReport(
        config=cfg,
        couplings=cs,
        density_cm3=number_density(cfg.n_atoms, cfg.geom),
        lifetime_s=config_lifetime(cfg),
        snr=effective_snr(cfg, cs),
        suppression_orders=scattering_suppression(cfg),
    )
