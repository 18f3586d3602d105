from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gie import experiment as ex
from gie.constants import BOHR_RADIUS, ERBIUM, HBAR, Species
from gie.spheroid import SpheroidGeometry, cross_coupling, self_coupling

SPHERE_2CM = SpheroidGeometry.sphere(0.01, 0.02)


def config(**kw) -> ex.ExperimentConfig:
    base = dict(species=ERBIUM, n_atoms=10**6, geom=SPHERE_2CM, time_s=1e4, reps=1e3)
    base.update(kw)
    return ex.ExperimentConfig(**base)


def test_config_validation_names_the_field():
    for kw, key in [
        (dict(n_atoms=0), "atoms"),
        (dict(time_s=0.0), "time_s"),
        (dict(reps=1), "reps"),
        (dict(setups=0), "setups"),
        (dict(squeeze_db=-1.0), "squeeze_db"),
        (dict(scheme="half-open"), "scheme"),
    ]:
        with pytest.raises(ValueError, match=f"^{key}"):
            config(**kw)
    with pytest.raises(ValueError, match="atom_mass"):
        Species("x", 0.0)


def test_optimal_phases():
    ph = ex.optimal_phases("one-open")
    assert ph.delta_open == pytest.approx(math.pi / 2)
    closed = ex.optimal_phases("both-closed")
    assert closed.mu == 0 and closed.nu == 0
    with pytest.raises(ValueError):
        ex.optimal_phases("other")


def test_couplings_examples():
    cs = ex.dimensionless_couplings(config())
    assert cs.kappa_s == 0.0
    assert cs.gamma == cs.self_gravity
    assert cs.lambda_cross_j == pytest.approx(cross_coupling(ERBIUM.atom_mass, SPHERE_2CM).value, rel=1e-9)
    assert cs.lambda_self_j == self_coupling(ERBIUM.atom_mass, 0.01, 0.01)
    assert cs.cross == pytest.approx(2 * cs.lambda_cross_j * 1e4 / HBAR, rel=1e-14)
    assert cs.cross < 0
    assert abs(cs.cross) == pytest.approx(2.4e-20, rel=0.02)


def test_contact_coupling_value():
    k = ex.contact_coupling(BOHR_RADIUS, ERBIUM.atom_mass, SPHERE_2CM)
    # g/(2V) with g = 4πħ²a0/m and V = (4/3)π(1 cm)³
    expected = 4 * math.pi * HBAR**2 * BOHR_RADIUS / ERBIUM.atom_mass / (2 * 4 / 3 * math.pi * 1e-6)
    assert k == pytest.approx(expected, rel=1e-14)
    assert k == pytest.approx(3.2024e-48, rel=1e-3)
    assert k > 1e9 * abs(cross_coupling(ERBIUM.atom_mass, SPHERE_2CM).value)


def test_gamma_includes_contact_and_intra_terms():
    cs = ex.dimensionless_couplings(config(scattering_length_m=1e-12, kappa_intra_j=1e-50))
    assert cs.gamma == pytest.approx(cs.self_gravity + cs.kappa_s - cs.kappa_d, rel=1e-15)
    assert cs.kappa_s > 0 and cs.kappa_d > 0


@given(f=st.floats(0.1, 10))
@settings(max_examples=20)
def test_phase_invariant_under_time_energy_rescaling(f):
    cs = ex.CouplingSet(-1e-58, -3e-58, 0.0, 0.0, 1e4)
    scaled = ex.CouplingSet(-1e-58 / f, -3e-58 / f, 0.0, 0.0, 1e4 * f)
    assert scaled.cross == pytest.approx(cs.cross, rel=1e-14)
    assert scaled.gamma == pytest.approx(cs.gamma, rel=1e-14)


def test_cached_cross_coupling_matches_direct():
    g = SpheroidGeometry.from_volume(1e-3, 0.9)
    assert ex.cached_cross_coupling(ERBIUM.atom_mass, g) == pytest.approx(
        cross_coupling(ERBIUM.atom_mass, g).value, rel=1e-8
    )


def test_squeezing_gain():
    assert ex.squeezing_gain(0) == 1.0
    assert ex.squeezing_gain(20) == pytest.approx(100.0, rel=1e-15)
    assert ex.squeezing_gain(35) == pytest.approx(3162.2776601683795, rel=1e-15)
    with pytest.raises(ValueError):
        ex.squeezing_gain(-3)


def test_effective_snr_squeezing_ratio():
    plain = ex.effective_snr(config())
    squeezed = ex.effective_snr(config(squeeze_db=20))
    assert squeezed.snr / plain.snr == pytest.approx(100.0, rel=1e-12)
    assert squeezed.diagnostics["perturbative_ok"]
    assert squeezed.variance == pytest.approx(plain.variance / 1e4, rel=1e-12)


def test_effective_snr_combines_setups():
    one = ex.effective_snr(config())
    ten = ex.effective_snr(config(setups=10))
    assert ten.snr / one.snr == pytest.approx(math.sqrt(10), rel=1e-9)
    assert ten.diagnostics["effective_reps"] == 1e4


def test_effective_snr_both_closed_is_half():
    a = ex.effective_snr(config(n_atoms=10**12))
    b = ex.effective_snr(config(n_atoms=10**12, scheme="both-closed"))
    assert b.snr / a.snr == pytest.approx(0.5, rel=1e-3)


def test_perturbative_flag():
    r = ex.effective_snr(config(n_atoms=10**16, squeeze_db=200))
    assert not r.diagnostics["perturbative_ok"]
    assert r.diagnostics["perturbative_level"] > ex.PERTURBATIVE_LIMIT


@pytest.mark.parametrize("key,values,rising", [
    ("time_s", [1e2, 1e3, 1e4], True),
    ("n_atoms", [10**8, 10**10, 10**12], True),
    ("d", [0.02, 0.05, 0.2], False),
])
def test_snr_monotone(key, values, rising):
    snrs = []
    for v in values:
        cfg = config(geom=SpheroidGeometry.sphere(0.01, v)) if key == "d" else config(**{key: v})
        snrs.append(ex.effective_snr(cfg).snr)
    assert snrs == (sorted(snrs) if rising else sorted(snrs, reverse=True))


def test_number_density():
    g = SpheroidGeometry.sphere(0.1337, 0.2674)
    n = ex.number_density(1e16, g)
    assert n == pytest.approx(1e12, rel=2e-3)  # R is rounded to 13.37 cm
    assert n < ex.DENSITY_CAP_CM3
    assert ex.number_density(0, g) == 0.0


def test_three_body_lifetime():
    assert ex.three_body_lifetime(1e14, 3e-30, 10) == pytest.approx(1650.0, rel=1e-12)
    assert ex.three_body_lifetime(1e14, 3e-30, 1.0) == 0.0
    assert ex.three_body_lifetime(1e14, 3e-30, 1 + 1e-9) < 1e-5
    for bad in [(0, 3e-30), (1e14, 0)]:
        with pytest.raises(ValueError):
            ex.three_body_lifetime(*bad)


@pytest.mark.parametrize("n0", [1e11, 1e12, 1e13, 1e14])
@pytest.mark.parametrize("f", [2.0, 10.0])
def test_lifetime_matches_ode(n0, f):
    exact = ex.three_body_lifetime(n0, 3e-30, f)
    assert ex.three_body_lifetime_numeric(n0, 3e-30, f) == pytest.approx(exact, rel=1e-6)


def test_config_lifetime_needs_loss():
    assert math.isinf(ex.config_lifetime(config(species=Species("plain", 1e-25))))
    assert math.isfinite(ex.config_lifetime(config()))


def test_suppression_orders():
    assert ex.suppression_orders(1e8, 1.0, 1e4) == pytest.approx(4.0)
    assert ex.suppression_orders(1.0, 1.0, 1.0) == 0.0
    headline = ex.headline_config()
    assert 3 <= ex.scattering_suppression(headline) <= 6
    assert ex.scattering_suppression(headline) == pytest.approx(3.98, abs=0.01)


def test_headline_report():
    rep = ex.headline_report()
    d = rep.as_dict()
    assert d["density_cm3"] == pytest.approx(1e12, rel=1e-9)
    assert d["atoms"] == 10**16 and d["setups"] == 10
    assert d["snr"] == pytest.approx(2.6488e-3, rel=1e-3)
    for key in ("cross_coupling_j", "lambda", "density_cm3", "lifetime_s", "snr_ratio_to_one"):
        assert math.isfinite(d[key])
    text = "\n".join(rep.lines())
    assert "below order-1 target" in text
    assert "3-body lifetime" in text
