"""Scenario configuration.

One JSON document drives every command. Physical quantities carry their unit
in the key name. Missing sections and keys take the reference settings
(0.60-10.49 mK, nbar 0.08-0.37, 6.7 MHz scattering, 15 us in 1 us bins).
"""

import hashlib
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import constants as _c
from .constants import DEFAULT_CONSTANTS, KHZ, MHZ, US, PhysicalConstants
from .dynamics import ScatteringParams
from .phaselock import MAX_INTEGRAL_GAIN, PhaseLockModel
from .physics import ANCHOR_DEPTH_MK, ANCHOR_DP_HBARK, TrapModel

__all__ = ["Scenario", "ValidationError", "load_scenario"]

DEFAULT_DEPTHS_MK = [0.60, 0.95, 1.5, 2.4, 3.8, 5.0, 6.6, 8.5, 10.49]
# stand-in per-depth phonon numbers spanning the 0.08-0.37 range
DEFAULT_SCAN_NBAR = [0.37, 0.33, 0.29, 0.25, 0.21, 0.17, 0.13, 0.10, 0.08]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantsSection(_Section):
    hbar_js: Optional[float] = Field(None, gt=0)
    kb_jk: Optional[float] = Field(None, gt=0)
    mass_kg: Optional[float] = Field(None, gt=0)
    lambda_nm: Optional[float] = Field(None, gt=0)
    gamma_d2_mhz: Optional[float] = Field(None, gt=0)

    def build(self):
        return DEFAULT_CONSTANTS.with_overrides(
            hbar=self.hbar_js,
            kB=self.kb_jk,
            mass_rb87=self.mass_kg,
            lambda_photon=None if self.lambda_nm is None else self.lambda_nm * _c.NM,
            gamma_d2=None if self.gamma_d2_mhz is None else 2 * np.pi * self.gamma_d2_mhz * MHZ,
        )


class TrapSection(_Section):
    anchor_depth_mk: float = Field(ANCHOR_DEPTH_MK, gt=0)
    anchor_dp_hbark: float = Field(ANCHOR_DP_HBARK, gt=0)
    anchor_radial_khz: float = Field(300.0, gt=0)

    def build(self, depth, constants):
        return TrapModel.from_momentum_anchor(
            depth, self.anchor_depth_mk, self.anchor_dp_hbark, 2 * np.pi * self.anchor_radial_khz * KHZ, constants
        )


class ScanSection(_Section):
    depths_mk: List[float] = Field(default_factory=lambda: list(DEFAULT_DEPTHS_MK), min_length=1)
    nbar: Union[float, List[float]] = Field(default_factory=lambda: list(DEFAULT_SCAN_NBAR))
    axial_projection: float = Field(1.0, gt=0, le=1)

    @model_validator(mode="after")
    def _check(self):
        if any(d <= 0 for d in self.depths_mk):
            raise ValueError("depths_mk entries must be > 0")
        nbar = self.nbar if isinstance(self.nbar, list) else [self.nbar]
        if any(n < 0 for n in nbar):
            raise ValueError("nbar entries must be >= 0")
        if isinstance(self.nbar, list) and len(self.nbar) not in (1, len(self.depths_mk)):
            raise ValueError("nbar must be a single value or one value per depth")
        return self

    def nbar_per_depth(self):
        nbar = self.nbar if isinstance(self.nbar, list) else [self.nbar]
        return nbar * len(self.depths_mk) if len(nbar) == 1 else list(nbar)


class ScatteringSection(_Section):
    rate_mhz: float = Field(6.7, ge=0)
    saturation: float = Field(0.1, ge=0)
    excited_lifetime_ns: Optional[float] = Field(None, gt=0)
    antitrap_factor: float = -1.0
    emission_pattern: Literal["isotropic", "dipole", "axial_only"] = "dipole"
    axial_projection: float = Field(1.0, gt=0, le=1)

    def build(self, constants):
        lifetime = constants.excited_lifetime if self.excited_lifetime_ns is None else self.excited_lifetime_ns * 1e-9
        return ScatteringParams(
            rate=self.rate_mhz * MHZ,
            saturation=self.saturation,
            excited_lifetime=lifetime,
            antitrap_factor=self.antitrap_factor,
            emission_pattern=self.emission_pattern,
            axial_projection=self.axial_projection,
        )


class DynamicsSection(_Section):
    depth_mk: float = Field(10.49, gt=0)
    nbar: float = Field(0.0, ge=0)
    total_time_us: float = Field(15.0, gt=0)
    bin_width_us: float = Field(1.0, gt=0)
    n_samples: int = Field(100_000, ge=1000)
    workers: int = Field(1, ge=1)
    wigner_bins: int = Field(41, ge=2)
    wigner_x_range_um: Tuple[float, float] = (-2.0, 2.0)
    wigner_p_range_hbark: Tuple[float, float] = (-40.0, 40.0)

    @model_validator(mode="after")
    def _check(self):
        n_bins = round(self.total_time_us / self.bin_width_us)
        if n_bins < 1 or abs(n_bins * self.bin_width_us - self.total_time_us) > 1e-9 * self.total_time_us:
            raise ValueError("bin_width_us must divide total_time_us")
        for name in ("wigner_x_range_um", "wigner_p_range_hbark"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ValueError(f"{name} must be increasing")
        return self

    @property
    def total_time(self):
        return self.total_time_us * US

    @property
    def bin_width(self):
        return self.bin_width_us * US


class ThermometrySection(_Section):
    nbar: float = Field(0.099, ge=0)
    trap_freq_khz: Optional[float] = Field(None, gt=0)  # default: axial frequency at anchor depth
    peak_fwhm_khz: float = Field(4.0, gt=0)
    carrier_amp: float = Field(0.3, ge=0, le=1)
    carrier_fwhm_khz: Optional[float] = Field(None, gt=0)
    sideband_coupling: Optional[float] = Field(None, gt=0, le=1)
    shots: int = Field(200, ge=1)
    n_points: int = Field(801, ge=15)
    span: float = Field(1.6, gt=1)
    noiseless: bool = False


class FringeSection(_Section):
    visibility: Optional[float] = Field(None, ge=0, le=1)  # default: closed form at depth_mk, nbar
    depth_mk: float = Field(10.49, gt=0)
    nbar: float = Field(0.0, ge=0)
    phase_offset_rad: float = 0.0
    n_points: int = Field(20, ge=4)
    mean_counts: float = Field(1000.0, ge=1)
    phase_noise_mrad: float = Field(16.5, ge=0)
    noiseless: bool = False
    bootstrap: int = Field(0, ge=0)


class LockSection(_Section):
    duration_s: float = Field(10.0, gt=0)
    residual_rms_mrad: float = Field(13.5, ge=0)
    beat_frequency_khz: float = Field(200.0, gt=0)
    actuator_range_rad: float = Field(240.0, gt=0)
    drift_rate_rad_per_sqrt_s: float = Field(0.3, ge=0)
    servo_bandwidth_hz: float = Field(100.0, ge=0)
    thermal_amplitude_rad: float = Field(1.0, ge=0)
    thermal_frequency_hz: float = Field(0.1, gt=0)
    sample_rate_khz: float = Field(10.0, gt=0)
    proportional_gain: float = Field(0.1, ge=0, lt=1)

    @model_validator(mode="after")
    def _check(self):
        gain = 2 * np.pi * self.servo_bandwidth_hz / (self.sample_rate_khz * KHZ)
        if gain > MAX_INTEGRAL_GAIN:
            raise ValueError(f"servo_bandwidth_hz too high for sample_rate_khz (per-sample gain {gain:.3f})")
        if self.duration_s * self.sample_rate_khz * KHZ < 2:
            raise ValueError("duration_s too short for sample_rate_khz")
        return self

    def build(self):
        return PhaseLockModel(
            residual_rms=self.residual_rms_mrad * 1e-3,
            beat_frequency=self.beat_frequency_khz * KHZ,
            actuator_range=self.actuator_range_rad,
            drift_rate=self.drift_rate_rad_per_sqrt_s,
            servo_bandwidth=self.servo_bandwidth_hz,
            thermal_amplitude=self.thermal_amplitude_rad,
            thermal_frequency=self.thermal_frequency_hz,
            sample_rate=self.sample_rate_khz * KHZ,
            proportional_gain=self.proportional_gain,
        )


class Scenario(_Section):
    seed: int = Field(2024, ge=0, lt=2**64)
    constants: ConstantsSection = ConstantsSection()
    trap: TrapSection = TrapSection()
    scan: ScanSection = ScanSection()
    scattering: ScatteringSection = ScatteringSection()
    dynamics: DynamicsSection = DynamicsSection()
    thermometry: ThermometrySection = ThermometrySection()
    fringe: FringeSection = FringeSection()
    lock: LockSection = LockSection()

    def physical_constants(self) -> PhysicalConstants:
        return self.constants.build()

    def resolved(self):
        """Fully expanded document (all defaults filled in)."""
        return self.model_dump(mode="json")

    def digest(self):
        from .io import dumps

        return hashlib.sha256(dumps(self.resolved()).encode()).hexdigest()


def load_scenario(text=None, overrides=None):
    """Parse and validate a scenario from JSON text, applying dotted overrides.

    Raises:
        pydantic.ValidationError: with field paths for every invalid entry.
    """
    import json

    data = json.loads(text) if text else {}
    for dotted, value in (overrides or {}).items():
        node = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    return Scenario.model_validate(data)


def format_errors(exc):
    """One line per invalid field: 'path.to.field: message'."""
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return lines
