"""Physical constants and experiment geometry."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

AMU = constants.atomic_mass
HBAR = constants.hbar
ARGON40_MASS = 39.9623831237 * AMU


@dataclass(frozen=True)
class ExperimentParams:
    """Geometry and constants of the single-photon interferometer.

    All quantities are SI. Momenta elsewhere in the package are expressed in
    units of the photon recoil ``hbar * k0``.
    """

    wavelength: float = 795e-9
    mass: float = ARGON40_MASS
    v_long: float = 600.0
    l_bragg: float = 0.25
    l_detector: float = 1.0
    beam_width: float = 10e-6
    d_mean: float = 2.8e-6
    linewidth: float = 3.1e7
    c: float = constants.c

    def __post_init__(self):
        for name in ("wavelength", "mass", "v_long", "l_detector", "linewidth", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.l_bragg < 0 or self.l_bragg > self.l_detector:
            raise ValueError("l_bragg must lie between emission and detector")
        if self.beam_width < 0:
            raise ValueError("beam_width must be non-negative")
        if self.d_mean < 0:
            raise ValueError("d_mean must be non-negative")
        # the image picture needs d << c / Gamma
        if self.d_mean + self.beam_width >= 1e-3 * self.c / self.linewidth:
            raise ValueError("mirror distance violates the d << c/Gamma retardation limit")

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def recoil_velocity(self) -> float:
        return HBAR * self.k0 / self.mass

    @property
    def recoil_frequency(self) -> float:
        """hbar k0^2 / 2m in rad/s."""
        return HBAR * self.k0**2 / (2 * self.mass)

    @property
    def t_bragg(self) -> float:
        return self.l_bragg / self.v_long

    @property
    def t_detector(self) -> float:
        return self.l_detector / self.v_long
