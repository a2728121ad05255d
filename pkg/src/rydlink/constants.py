"""Physical constants and the default cesium ladder parameters."""

from dataclasses import dataclass
import math

TWO_PI = 2.0 * math.pi
AMU = 1.66053906660e-27


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34
    k_B: float = 1.380649e-23
    e_charge: float = 1.6e-19
    a0: float = 5.2e-11
    eps0: float = 8.854e-12
    Z0: float = 377.0
    c_light: float = 299792458.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value}")

    @property
    def h(self):
        return TWO_PI * self.hbar


CONST = PhysicalConstants()

CS_MASS = 132.905451933 * AMU

# Cs 6S1/2 -> 6P3/2 -> 47D5/2 -> 48P3/2 ladder
DEFAULT_GAMMA_HZ = (0.0, 5.2e6, 3.9e3, 1.7e3)
DEFAULT_DIP12_EA0 = 2.5
DEFAULT_DIPRF_EA0 = -1443.459

# Vapour density 4.89e10 cm^-3. The negative-exponent reading (4.89e-10 cm^-3) is kept
# for comparison only; it gives no measurable absorption.
DEFAULT_N0_PER_M3 = 4.89e16
NEGATIVE_EXPONENT_N0_PER_M3 = 4.89e-4
