"""Interferometer phase-lock simulation.

The environment drives the path phase with a random walk plus a slow
sinusoid (thermal breathing) and fast white jitter the servo cannot follow.
A discrete proportional-integral loop, delayed by one sample, feeds back
through an actuator that saturates at +-actuator_range / 2. The heterodyne
readout is abstracted away: the servo sees the phase error directly, and the
beat frequency is carried as metadata only.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError

# per-sample integrator gain limit; above it the one-sample loop delay causes
# gain peaking and the residual rises with gain
MAX_INTEGRAL_GAIN = 0.2


@dataclass(frozen=True)
class PhaseLockModel:
    """Noise profile and servo settings.

    drift_rate is the random-walk strength: rms phase excursion accumulated
    in one second [rad/s^0.5]. residual_rms is the fast white path jitter
    [rad] left over above the servo bandwidth.
    """

    residual_rms: float = 0.0135
    beat_frequency: float = 200e3
    actuator_range: float = 240.0
    drift_rate: float = 0.3
    servo_bandwidth: float = 100.0
    thermal_amplitude: float = 1.0
    thermal_frequency: float = 0.1
    sample_rate: float = 10e3
    proportional_gain: float = 0.1

    def __post_init__(self):
        if self.residual_rms < 0:
            raise DomainError("residual_rms must be >= 0")
        if self.actuator_range <= 0:
            raise DomainError("actuator_range must be > 0")
        if self.drift_rate < 0 or self.thermal_amplitude < 0:
            raise DomainError("noise amplitudes must be >= 0")
        if self.servo_bandwidth < 0 or self.sample_rate <= 0:
            raise DomainError("servo_bandwidth must be >= 0 and sample_rate > 0")
        if self.integral_gain > MAX_INTEGRAL_GAIN:
            raise DomainError(
                f"servo bandwidth too high for the sample rate (per-sample gain {self.integral_gain:.3f} "
                f"> {MAX_INTEGRAL_GAIN}); the sampled loop starts to amplify noise"
            )

    @property
    def integral_gain(self):
        """Per-sample integrator gain giving unity loop gain at servo_bandwidth."""
        return 2 * np.pi * self.servo_bandwidth / self.sample_rate


@dataclass(frozen=True)
class LockResult:
    residual_rms: float
    times: np.ndarray
    phase: np.ndarray
    open_loop_rms: float
    locked: bool
    saturated: bool


@njit(cache=True)
def _servo_loop(disturbance, jitter, gain_i, gain_p, limit):
    n = disturbance.size
    error = np.empty(n)
    integrator = 0.0
    actuator = 0.0
    saturated = False
    last = 0.0
    for k in range(n):
        error[k] = disturbance[k] + actuator + jitter[k]
        last = error[k]
        integrator -= gain_i * last
        if integrator > limit:
            integrator = limit
            saturated = True
        elif integrator < -limit:
            integrator = -limit
            saturated = True
        actuator = integrator - gain_p * last
        if actuator > limit:
            actuator = limit
            saturated = True
        elif actuator < -limit:
            actuator = -limit
            saturated = True
    return error, saturated


def environment(model, duration, seed):
    """Slow disturbance and fast jitter traces on the simulation grid."""
    n = int(round(duration * model.sample_rate))
    if n < 2:
        raise DomainError("duration too short for the sample rate")
    gen = np.random.default_rng(seed)
    t = np.arange(n) / model.sample_rate
    steps = gen.normal(0.0, model.drift_rate / np.sqrt(model.sample_rate), n)
    walk = np.cumsum(steps) - steps[0]
    slow = walk + model.thermal_amplitude * np.sin(2 * np.pi * model.thermal_frequency * t)
    jitter = gen.normal(0.0, model.residual_rms, n) if model.residual_rms > 0 else np.zeros(n)
    return t, slow, jitter


def lock_residual_simulation(model, duration, seed=0):
    """Closed-loop phase trace and its rms (standard deviation).

    The open-loop rms of the same disturbance realisation is returned
    alongside. With zero servo bandwidth the loop is open and the result is
    flagged ``locked=False``.
    """
    if not duration > 0:
        raise DomainError("duration must be > 0")
    t, slow, jitter = environment(model, duration, seed)
    open_loop = slow + jitter
    open_rms = float(np.std(open_loop))
    if model.servo_bandwidth == 0:
        return LockResult(open_rms, t, open_loop, open_rms, False, False)
    phase, saturated = _servo_loop(slow, jitter, model.integral_gain, model.proportional_gain,
                                   0.5 * model.actuator_range)
    return LockResult(float(np.std(phase)), t, phase, open_rms, not saturated, bool(saturated))
