"""Trap model, Gaussian motional states and closed-form recoil visibility.

Units: trap depths in mK, angular frequencies in rad/s, everything else SI.
All functions broadcast over numpy arrays.
"""

from dataclasses import dataclass

import numpy as np

from .constants import DEFAULT_CONSTANTS, KHZ
from .errors import DomainError

# calibration pair: ground-state momentum spread 1.60 hbar k at 10.49 mK
ANCHOR_DEPTH_MK = 10.49
ANCHOR_DP_HBARK = 1.60
# nominal radial frequency (~300 kHz); only used for reporting
ANCHOR_RADIAL_FREQ = 2 * np.pi * 300 * KHZ


def _positive(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")
    return arr


def _nonnegative(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be finite and >= 0, got {value!r}")
    return arr


def _scalar(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def anchor_axial_frequency(anchor_dp_hbark=ANCHOR_DP_HBARK, constants=DEFAULT_CONSTANTS):
    """Axial angular frequency whose ground state has momentum spread ``anchor_dp_hbark``.

    Inverts dp = sqrt(hbar m omega / 2), i.e. omega = 2 dp^2 / (hbar m).
    """
    dp = _positive("anchor_dp_hbark", anchor_dp_hbark) * constants.hbar_k
    return _scalar(2 * dp**2 / (constants.hbar * constants.mass_rb87))


@dataclass(frozen=True)
class TrapModel:
    """Harmonic tweezer whose frequencies scale as sqrt(depth) from one anchor."""

    depth: float
    anchor_depth: float = ANCHOR_DEPTH_MK
    anchor_axial_freq: float = None
    anchor_radial_freq: float = ANCHOR_RADIAL_FREQ

    def __post_init__(self):
        if self.anchor_axial_freq is None:
            object.__setattr__(self, "anchor_axial_freq", anchor_axial_frequency())
        for name in ("depth", "anchor_depth", "anchor_axial_freq", "anchor_radial_freq"):
            _positive(name, getattr(self, name))

    @classmethod
    def from_momentum_anchor(
        cls,
        depth,
        anchor_depth=ANCHOR_DEPTH_MK,
        anchor_dp_hbark=ANCHOR_DP_HBARK,
        anchor_radial_freq=ANCHOR_RADIAL_FREQ,
        constants=DEFAULT_CONSTANTS,
    ):
        return cls(
            depth=depth,
            anchor_depth=anchor_depth,
            anchor_axial_freq=anchor_axial_frequency(anchor_dp_hbark, constants),
            anchor_radial_freq=anchor_radial_freq,
        )

    def at_depth(self, depth):
        return TrapModel(depth, self.anchor_depth, self.anchor_axial_freq, self.anchor_radial_freq)

    @property
    def axial_freq(self):
        return trap_frequencies(self, self.depth)[0]

    @property
    def radial_freq(self):
        return trap_frequencies(self, self.depth)[1]


def trap_frequencies(model, depth=None):
    """Axial and radial angular frequencies at ``depth`` (mK).

    Harmonic approximation: omega is proportional to sqrt(U).
    """
    depth = model.depth if depth is None else depth
    scale = np.sqrt(_positive("depth", depth) / model.anchor_depth)
    return _scalar(model.anchor_axial_freq * scale), _scalar(model.anchor_radial_freq * scale)


def ground_state_sigmas(omega, mass=DEFAULT_CONSTANTS.mass_rb87, nbar=0.0, hbar=DEFAULT_CONSTANTS.hbar):
    """Position and momentum spreads of a thermal oscillator state.

    Returns:
        (delta_x, delta_p) with
        delta_x = sqrt(hbar (2n+1) / (2 m omega)),
        delta_p = sqrt(hbar m omega (2n+1) / 2).
    """
    omega = _positive("omega", omega)
    mass = _positive("mass", mass)
    scale = 2 * _nonnegative("nbar", nbar) + 1
    dx = np.sqrt(hbar * scale / (2 * mass * omega))
    dp = np.sqrt(hbar * mass * omega * scale / 2)
    return _scalar(dx), _scalar(dp)


@dataclass(frozen=True)
class MotionalState:
    """Gaussian (thermal) state of one oscillator mode."""

    omega: float
    nbar: float = 0.0
    mass: float = DEFAULT_CONSTANTS.mass_rb87
    hbar: float = DEFAULT_CONSTANTS.hbar

    def __post_init__(self):
        _positive("omega", self.omega)
        _positive("mass", self.mass)
        _nonnegative("nbar", self.nbar)

    @classmethod
    def in_trap(cls, trap, nbar=0.0, constants=DEFAULT_CONSTANTS):
        return cls(trap.axial_freq, nbar, constants.mass_rb87, constants.hbar)

    @property
    def delta_x(self):
        return ground_state_sigmas(self.omega, self.mass, self.nbar, self.hbar)[0]

    @property
    def delta_p(self):
        return ground_state_sigmas(self.omega, self.mass, self.nbar, self.hbar)[1]

    @property
    def delta_x0(self):
        """Zero-point position spread (nbar = 0)."""
        return ground_state_sigmas(self.omega, self.mass, 0.0, self.hbar)[0]

    @property
    def delta_p0(self):
        return ground_state_sigmas(self.omega, self.mass, 0.0, self.hbar)[1]


def eta(delta_p, axial_projection=1.0, constants=DEFAULT_CONSTANTS):
    """Recoil ratio: projected photon momentum over twice the momentum spread."""
    delta_p = _positive("delta_p", delta_p)
    proj = np.asarray(axial_projection, dtype=float)
    if np.any(proj <= 0) or np.any(proj > 1):
        raise DomainError(f"axial_projection must lie in (0, 1], got {axial_projection!r}")
    return _scalar(proj * constants.hbar_k / (2 * delta_p))


def eta_eff(eta_value, nbar):
    """Thermally broadened recoil ratio eta * sqrt(2 nbar + 1)."""
    eta_value = _positive("eta", eta_value)
    nbar = _nonnegative("nbar", nbar)
    return _scalar(eta_value * np.sqrt(2 * nbar + 1))


def visibility(eta_eff_value):
    """Fringe visibility exp(-2 eta_eff^2)."""
    return _scalar(np.exp(-2 * _nonnegative("eta_eff", eta_eff_value) ** 2))


def momentum_overlap(state, delta, constants=DEFAULT_CONSTANTS):
    """Overlap <psi(p - delta/2)|psi(p + delta/2)> of a centred thermal state.

    For a mixed state this is the characteristic function Tr[rho exp(i delta x / hbar)],
    which is real and positive for a state centred at the origin:
    exp(-(delta^2 / 2) (dx0^2 / hbar^2) (2 nbar + 1)).

    Args:
        state: MotionalState.
        delta: total momentum displacement between the two branches (2 hbar k
            for the two recoil paths).
    """
    delta = np.asarray(delta, dtype=float)
    if not np.all(np.isfinite(delta)):
        raise DomainError("delta must be finite")
    spread = state.delta_x0 / state.hbar
    mag = np.exp(-0.5 * delta**2 * spread**2 * (2 * state.nbar + 1))
    return complex(mag) if mag.ndim == 0 else mag.astype(complex)


@dataclass(frozen=True)
class RecoilState:
    """Two-path photon/atom state after one scattering event.

    The atom is left in psi(p - hbar k) or psi(p + hbar k), correlated with the
    photon direction; ``phi`` is the relative phase of the two photon paths.
    """

    photon_momentum: float
    axial_projection: float
    eta: float
    eta_eff: float
    phi: float = 0.0

    @classmethod
    def from_state(cls, state, axial_projection=1.0, phi=0.0, constants=DEFAULT_CONSTANTS):
        e = eta(state.delta_p0, axial_projection, constants)
        return cls(constants.hbar_k, axial_projection, e, eta_eff(e, state.nbar), phi)

    @property
    def visibility(self):
        return visibility(self.eta_eff)

    def fringe(self, scan_phase):
        """Expected count unbalance at interferometer phase ``scan_phase``."""
        return self.visibility * np.cos(np.asarray(scan_phase) + self.phi)


def depth_scan(depths, nbar=0.0, trap=None, axial_projection=1.0, constants=DEFAULT_CONSTANTS):
    """Closed-form visibility along a list of trap depths.

    Returns a dict of arrays: depth_mk, omega_axial, delta_p, eta, nbar,
    v_ideal (nbar = 0) and v_thermal.
    """
    trap = trap or TrapModel.from_momentum_anchor(ANCHOR_DEPTH_MK, constants=constants)
    depths = _positive("depths", np.atleast_1d(np.asarray(depths, dtype=float)))
    nbar = np.broadcast_to(_nonnegative("nbar", nbar), depths.shape)
    omega = np.asarray(trap_frequencies(trap, depths)[0])
    _, dp = ground_state_sigmas(omega, constants.mass_rb87, 0.0, constants.hbar)
    e = np.asarray(eta(dp, axial_projection, constants))
    return {
        "depth_mk": depths,
        "omega_axial": omega,
        "delta_p": np.asarray(dp),
        "eta": e,
        "nbar": np.asarray(nbar, dtype=float),
        "v_ideal": np.asarray(visibility(e)),
        "v_thermal": np.asarray(visibility(eta_eff(e, nbar))),
    }
