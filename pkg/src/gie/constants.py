"""Physical constants and built-in atomic species.

All values are SI. Fundamental constants come from CODATA via
``scipy.constants``; isotope masses are AME2020 atomic masses.
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy import constants as _sc

G = _sc.G  # m^3 kg^-1 s^-2, CODATA
HBAR = _sc.hbar  # J s, exact
BOHR_RADIUS = _sc.physical_constants["Bohr radius"][0]  # m, CODATA
ATOMIC_MASS_UNIT = _sc.atomic_mass  # kg, CODATA

CM3_PER_M3 = 1e6
CM6_TO_M6 = 1e-12


@dataclass(frozen=True)
class Species:
    name: str
    atom_mass: float  # kg
    loss_coefficient: float | None = None  # three-body L, m^6/s

    def __post_init__(self):
        if not self.atom_mass > 0:
            raise ValueError(f"species {self.name!r}: atom_mass must be positive")
        if self.loss_coefficient is not None and not self.loss_coefficient > 0:
            raise ValueError(f"species {self.name!r}: loss coefficient must be positive")


# 166Er is the most abundant erbium isotope; L <~ 3e-30 cm^6/s is the
# measured upper bound for erbium three-body loss.
ERBIUM = Species("erbium", 165.9302931 * ATOMIC_MASS_UNIT, 3e-30 * CM6_TO_M6)
CESIUM = Species("cesium", 132.905451961 * ATOMIC_MASS_UNIT)
RUBIDIUM = Species("rubidium", 86.909180531 * ATOMIC_MASS_UNIT)

SPECIES = {s.name: s for s in (ERBIUM, CESIUM, RUBIDIUM)}


def get_species(name: str) -> Species:
    try:
        return SPECIES[name.lower()]
    except KeyError:
        known = ", ".join(sorted(SPECIES))
        raise ValueError(f"unknown species {name!r} (built-in: {known})") from None
