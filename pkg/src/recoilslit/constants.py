"""Physical constants for 87Rb scattering on the D2 cycling line.

All values in SI. hbar and kB come from scipy (CODATA); the atomic data are
the standard 87Rb D2 reference values.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import constants as _sc

from .errors import DomainError

MK = 1e-3  # millikelvin in kelvin
KHZ = 1e3
MHZ = 1e6
US = 1e-6
NM = 1e-9

RB87_MASS = 1.44316060e-25  # kg
RB87_D2_WAVELENGTH = 780.241e-9  # m, vacuum
RB87_D2_LINEWIDTH = 2 * np.pi * 6.07e6  # rad/s


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = _sc.hbar
    kB: float = _sc.k
    mass_rb87: float = RB87_MASS
    lambda_photon: float = RB87_D2_WAVELENGTH
    gamma_d2: float = RB87_D2_LINEWIDTH

    def __post_init__(self):
        for name in ("hbar", "kB", "mass_rb87", "lambda_photon", "gamma_d2"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and positive, got {value!r}")

    @property
    def k(self):
        """Photon wavenumber 2*pi/lambda [1/m]."""
        return 2 * np.pi / self.lambda_photon

    @property
    def hbar_k(self):
        """Single-photon recoil momentum [kg m/s]."""
        return self.hbar * self.k

    @property
    def recoil_energy(self):
        """(hbar k)^2 / 2m [J]."""
        return self.hbar_k**2 / (2 * self.mass_rb87)

    @property
    def excited_lifetime(self):
        """Natural lifetime 1/Gamma of the excited state [s]."""
        return 1.0 / self.gamma_d2

    def with_overrides(self, **kwargs):
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


DEFAULT_CONSTANTS = PhysicalConstants()
