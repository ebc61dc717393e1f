"""Desk-scale simulation of the single-atom recoiling-slit interferometer."""

__version__ = "0.1.0"

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .errors import ConvergenceError, DomainError, FitError, FitInvalidError
from .physics import (
    MotionalState,
    RecoilState,
    TrapModel,
    eta,
    eta_eff,
    ground_state_sigmas,
    momentum_overlap,
    trap_frequencies,
    visibility,
)

__all__ = [
    "DEFAULT_CONSTANTS",
    "PhysicalConstants",
    "ConvergenceError",
    "DomainError",
    "FitError",
    "FitInvalidError",
    "MotionalState",
    "RecoilState",
    "TrapModel",
    "eta",
    "eta_eff",
    "ground_state_sigmas",
    "momentum_overlap",
    "trap_frequencies",
    "visibility",
]
