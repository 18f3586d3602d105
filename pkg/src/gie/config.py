"""Flat ``key = value`` experiment files.

All physical quantities are SI with the unit in the key name. ``#`` starts a
comment. Example::

    species = erbium
    atoms = 1e16
    a_m = 0.0229
    c_m = 0.0046
    d_m = 0.0092
    time_s = 1e4
    reps = 1000
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Iterable, Mapping, TextIO

from .constants import SPECIES, Species
from .experiment import SCHEMES, ExperimentConfig, optimal_phases
from .oracle import PhaseConfig
from .spheroid import SpheroidGeometry

REQUIRED = ("species", "atoms", "a_m", "c_m", "d_m", "time_s", "reps")
OPTIONAL = (
    "setups",
    "squeeze_db",
    "a_s_m",
    "scheme",
    "phases.phi",
    "phases.phi_prime",
    "phases.varphi",
    "phases.varphi_prime",
    "kappa_intra_j",
    "mass_kg",
    "loss_m6_s",
)
KNOWN = REQUIRED + OPTIONAL


class ConfigError(ValueError):
    def __init__(self, message: str, keys: Iterable[str] = ()):
        super().__init__(message)
        self.keys = tuple(keys)


def parse_lines(lines: Iterable[str], source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}", [key])
        out[key] = value
    return out


def parse_overrides(items: Iterable[str]) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        out[key] = value
    return out


def _check_keys(values: Mapping[str, str]) -> None:
    unknown = [k for k in values if k not in KNOWN]
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}", unknown)


def _number(values, key, kind=float, default=None):
    if key not in values:
        return default
    text = values[key]
    try:
        x = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}", [key]) from None
    if not math.isfinite(x):
        raise ConfigError(f"{key}: must be finite, got {text!r}", [key])
    if kind is int:
        if x != math.floor(x):
            raise ConfigError(f"{key}: expected a whole number, got {text!r}", [key])
        return int(x)
    return x


def _species(values) -> Species:
    name = values["species"]
    mass = _number(values, "mass_kg")
    loss = _number(values, "loss_m6_s")
    builtin = SPECIES.get(name.lower())
    if builtin is None and mass is None:
        raise ConfigError(
            f"species: {name!r} is not built-in ({', '.join(sorted(SPECIES))}); supply mass_kg", ["species", "mass_kg"]
        )
    try:
        return Species(
            builtin.name if builtin and mass is None else name,
            mass if mass is not None else builtin.atom_mass,
            loss if loss is not None else (builtin.loss_coefficient if builtin else None),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), ["mass_kg"]) from None


def build_config(values: Mapping[str, str]) -> ExperimentConfig:
    _check_keys(values)
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}", missing)
    scheme = values.get("scheme", "one-open")
    if scheme not in SCHEMES:
        raise ConfigError(f"scheme: unknown scheme {scheme!r} (use one of {', '.join(SCHEMES)})", ["scheme"])
    base = optimal_phases(scheme)
    phases = PhaseConfig(
        phi=_number(values, "phases.phi", default=base.phi),
        phi_prime=_number(values, "phases.phi_prime", default=base.phi_prime),
        varphi=_number(values, "phases.varphi", default=base.varphi),
        varphi_prime=_number(values, "phases.varphi_prime", default=base.varphi_prime),
    )
    try:
        geom = SpheroidGeometry(_number(values, "a_m"), _number(values, "c_m"), _number(values, "d_m"))
    except ValueError as exc:
        raise ConfigError(f"geometry (a_m, c_m, d_m): {exc}", ["a_m", "c_m", "d_m"]) from None
    fields = dict(
        species=_species(values),
        n_atoms=_number(values, "atoms", int),
        geom=geom,
        time_s=_number(values, "time_s"),
        reps=_number(values, "reps"),
        setups=_number(values, "setups", int, 1),
        squeeze_db=_number(values, "squeeze_db", default=0.0),
        scattering_length_m=_number(values, "a_s_m", default=0.0),
        phases=phases,
        scheme=scheme,
        kappa_intra_j=_number(values, "kappa_intra_j", default=0.0),
    )
    try:
        return ExperimentConfig(**fields)
    except ValueError as exc:
        key = str(exc).split(":", 1)[0]
        raise ConfigError(str(exc), [key] if key in KNOWN else []) from None


def config_to_values(cfg: ExperimentConfig) -> dict[str, str]:
    g, p = cfg.geom, cfg.phases
    out = {
        "species": cfg.species.name,
        "atoms": str(cfg.n_atoms),
        "a_m": repr(g.a),
        "c_m": repr(g.c),
        "d_m": repr(g.d),
        "time_s": repr(float(cfg.time_s)),
        "reps": repr(float(cfg.reps)),
        "setups": str(cfg.setups),
        "squeeze_db": repr(float(cfg.squeeze_db)),
        "a_s_m": repr(float(cfg.scattering_length_m)),
        "scheme": cfg.scheme,
        "phases.phi": repr(p.phi),
        "phases.phi_prime": repr(p.phi_prime),
        "phases.varphi": repr(p.varphi),
        "phases.varphi_prime": repr(p.varphi_prime),
        "kappa_intra_j": repr(float(cfg.kappa_intra_j)),
        "mass_kg": repr(cfg.species.atom_mass),
    }
    if cfg.species.loss_coefficient is not None:
        out["loss_m6_s"] = repr(cfg.species.loss_coefficient)
    return out


def dump(cfg: ExperimentConfig, stream: TextIO) -> None:
    for key, value in config_to_values(cfg).items():
        stream.write(f"{key} = {value}\n")


def load_config(
    path: str | None, overrides: Iterable[str] = (), echo: TextIO | None = sys.stderr
) -> ExperimentConfig:
    """Read a config file (or nothing when ``path`` is None), apply overrides, echo the result."""
    values: dict[str, str] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values = parse_lines(fh, path)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    values.update(parse_overrides(overrides))
    cfg = build_config(values)
    if echo is not None:
        echo.write("# resolved config\n")
        dump(cfg, echo)
    return cfg


@dataclass(frozen=True)
class _Doc:
    key: str
    meaning: str


KEY_DOCS = (
    _Doc("species", "erbium, cesium, rubidium, or any name with mass_kg"),
    _Doc("atoms", "atoms per interferometer"),
    _Doc("a_m", "equatorial semi-axis of each cloud, m"),
    _Doc("c_m", "polar semi-axis of each cloud, m"),
    _Doc("d_m", "centre separation along the symmetry axis, m"),
    _Doc("time_s", "interaction time, s"),
    _Doc("reps", "repetitions per setup"),
    _Doc("setups", "independent setups (default 1)"),
    _Doc("squeeze_db", "spin squeezing, dB (default 0)"),
    _Doc("a_s_m", "s-wave scattering length, m (default 0)"),
    _Doc("scheme", "one-open or both-closed"),
    _Doc("phases.*", "phi, phi_prime, varphi, varphi_prime in rad (default: optimal for the scheme)"),
    _Doc("kappa_intra_j", "cross-arm contact coupling within one interferometer, J (default 0)"),
    _Doc("mass_kg", "atom mass, kg (overrides the built-in species)"),
    _Doc("loss_m6_s", "three-body loss coefficient, m^6/s"),
)
