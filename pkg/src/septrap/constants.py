"""Physical constants (CODATA 2018, SI) and ion species."""

from dataclasses import dataclass

HBAR = 1.054571817e-34  # J s
EPSILON_0 = 8.854187813e-12  # F / m
ELEMENTARY_CHARGE = 1.602176634e-19  # C
ATOMIC_MASS_UNIT = 1.660539067e-27  # kg

TWO_PI = 6.283185307179586


@dataclass(frozen=True)
class IonSpecies:
    """Mass (kg) and charge (C) of a trapped ion."""

    name: str
    mass: float
    charge: float

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"ion mass must be positive, got {self.mass}")
        if self.charge == 0:
            raise ValueError("ion charge must be non-zero")


BE9_PLUS = IonSpecies("Be9+", 9.012 * ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE)

SPECIES = {"Be9": BE9_PLUS, "Be9+": BE9_PLUS}


def species(name: str) -> IonSpecies:
    try:
        return SPECIES[name]
    except KeyError:
        raise ValueError(f"unknown ion species {name!r}; known: {sorted(SPECIES)}") from None
