"""Raman sideband thermometry: forward model and sideband-ratio fit.

For a thermal state with resolved sidebands, red (-omega) and blue (+omega)
sideband heights scale as nbar and nbar + 1, so the ratio r = A_red / A_blue
gives nbar = r / (1 - r) and a ground-state population p0 = 1 / (1 + nbar) = 1 - r.

Peaks are Lorentzians parameterised by height and FWHM. The two sidebands
share one width and sit symmetrically at +-omega; the carrier has its own
width.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, brentq, curve_fit

from .errors import ConvergenceError, DomainError, FitError, FitInvalidError

log = logging.getLogger(__name__)

ASSUMPTIONS = ("thermal state", "resolved sidebands", "weak excitation (heights linear in nbar)")
MIN_POINTS_PER_PEAK = 5
# variance floors in units of 1/shots: observed zero counts, and model tails
_ZERO_COUNT = 0.5
_MODEL_FLOOR = 0.05
MAX_REWEIGHT = 20


def nbar_to_population(nbar):
    nbar = np.asarray(nbar, dtype=float)
    if np.any(~np.isfinite(nbar)) or np.any(nbar < 0):
        raise DomainError(f"nbar must be >= 0, got {nbar!r}")
    p0 = 1.0 / (1.0 + nbar)
    return float(p0) if p0.ndim == 0 else p0


def population_to_nbar(p0):
    p0 = np.asarray(p0, dtype=float)
    if np.any(~np.isfinite(p0)) or np.any(p0 <= 0) or np.any(p0 > 1):
        raise DomainError(f"p0 must lie in (0, 1], got {p0!r}")
    nbar = 1.0 / p0 - 1.0
    return float(nbar) if nbar.ndim == 0 else nbar


def ratio_to_nbar(r):
    return r / (1.0 - r)


@dataclass(frozen=True)
class SidebandSpectrum:
    """Transfer probability versus detuning (rad/s) from the carrier."""

    detunings: np.ndarray
    transfer: np.ndarray
    uncertainty: np.ndarray
    shots: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        y = np.asarray(self.transfer, dtype=float)
        s = np.asarray(self.uncertainty, dtype=float)
        if not (d.ndim == 1 and d.shape == y.shape == s.shape):
            raise DomainError("detunings, transfer and uncertainty must be 1-d arrays of equal length")
        if np.any(np.diff(d) <= 0):
            raise DomainError("detuning grid must be strictly increasing")
        if np.any(y < 0) or np.any(y > 1):
            raise DomainError("transfer must lie in [0, 1]")
        if np.any(s < 0):
            raise DomainError("uncertainties must be >= 0")
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "transfer", y)
        object.__setattr__(self, "uncertainty", s)


@dataclass(frozen=True)
class ThermometryFit:
    nbar: float
    nbar_err_lo: float
    nbar_err_hi: float
    p0: float
    p0_err_lo: float
    p0_err_hi: float
    ratio: float
    ratio_err: float
    nbar_err: float  # first-order (covariance) error
    red_amp: float
    blue_amp: float
    red_amp_err: float
    blue_amp_err: float
    carrier_amp: float
    carrier_width: float
    sideband_width: float
    sideband_freq: float
    chi2: float
    ndof: int
    assumptions: tuple = ASSUMPTIONS

    def report(self):
        """JSON-ready dict; frequencies and widths in kHz."""
        to_khz = 1.0 / (2 * np.pi * 1e3)
        return {
            "nbar": self.nbar,
            "nbar_err_lo": self.nbar_err_lo,
            "nbar_err_hi": self.nbar_err_hi,
            "nbar_err_first_order": self.nbar_err,
            "p0": self.p0,
            "p0_err_lo": self.p0_err_lo,
            "p0_err_hi": self.p0_err_hi,
            "ratio": self.ratio,
            "ratio_err": self.ratio_err,
            "amplitudes": {
                "carrier": self.carrier_amp,
                "red": self.red_amp,
                "blue": self.blue_amp,
                "red_err": self.red_amp_err,
                "blue_err": self.blue_amp_err,
            },
            "widths": {
                "carrier_fwhm_khz": self.carrier_width * to_khz,
                "sideband_fwhm_khz": self.sideband_width * to_khz,
            },
            "sideband_freq_khz": self.sideband_freq * to_khz,
            "chi2": self.chi2,
            "ndof": self.ndof,
            "assumptions": list(self.assumptions),
        }


def lorentzian(d, height, center, fwhm):
    return height / (1.0 + (2.0 * (d - center) / fwhm) ** 2)


def spectrum_model(d, carrier_amp, carrier_width, blue_amp, ratio, sideband_width, sideband_freq):
    return (
        lorentzian(d, carrier_amp, 0.0, carrier_width)
        + lorentzian(d, blue_amp, sideband_freq, sideband_width)
        + lorentzian(d, ratio * blue_amp, -sideband_freq, sideband_width)
    )


def synthesize_spectrum(
    nbar,
    omega,
    peak_width,
    carrier_amp=0.3,
    noise_seed=None,
    *,
    sideband_coupling=None,
    carrier_width=None,
    shots=200,
    n_points=801,
    span=1.6,
):
    """Three-Lorentzian sideband spectrum.

    Blue height is ``sideband_coupling * (nbar + 1)`` and red height
    ``sideband_coupling * nbar``. The default coupling is 0.7, lowered when
    needed so the blue peak stays at or below 0.95. With ``noise_seed`` set, every point is a
    binomial draw of ``shots`` trials; otherwise the spectrum is exact and its
    uncertainties are zero.

    Args:
        omega: trap angular frequency (sideband position) [rad/s].
        peak_width: sideband FWHM [rad/s].
        span: half-width of the detuning grid in units of omega.
    """
    if not (np.isfinite(nbar) and nbar >= 0):
        raise DomainError(f"nbar must be >= 0, got {nbar}")
    if not (omega > 0 and peak_width > 0):
        raise DomainError("omega and peak_width must be > 0")
    carrier_width = peak_width if carrier_width is None else carrier_width
    if sideband_coupling is None:
        sideband_coupling = min(0.7, 0.95 / (nbar + 1.0))
    if carrier_width <= 0 or carrier_amp < 0 or sideband_coupling <= 0:
        raise DomainError("invalid carrier width, carrier amplitude or coupling")
    if n_points < 3 * MIN_POINTS_PER_PEAK:
        raise DomainError("too few detuning points")

    d = np.linspace(-span * omega, span * omega, int(n_points))
    blue = sideband_coupling * (nbar + 1.0)
    ratio = nbar / (nbar + 1.0)
    expected = spectrum_model(d, carrier_amp, carrier_width, blue, ratio, peak_width, omega)
    if expected.max() > 1:
        raise DomainError("transfer exceeds 1; lower sideband_coupling or carrier_amp")
    meta = {"nbar_true": float(nbar), "omega": float(omega), "peak_width": float(peak_width)}
    if noise_seed is None:
        return SidebandSpectrum(d, expected, np.zeros_like(d), None, meta)

    gen = np.random.default_rng(noise_seed)
    k = gen.binomial(int(shots), expected)
    measured = k / shots
    return SidebandSpectrum(d, measured, binomial_sigma(measured, shots), int(shots), meta)


def binomial_sigma(prob, shots, floor=_ZERO_COUNT):
    """Binomial standard error with a floor for points at 0 or 1."""
    p = np.clip(prob, floor / shots, 1 - floor / shots)
    return np.sqrt(p * (1 - p) / shots)


def _initial_guess(spectrum, omega_guess):
    d, y = spectrum.detunings, spectrum.transfer
    step = np.median(np.diff(d))
    near = np.abs(d) < 0.25 * omega_guess
    carrier_amp = max(float(y[near].max()) if near.any() else 0.0, 1e-3)
    blue_zone = np.abs(d - omega_guess) < 0.5 * omega_guess
    red_zone = np.abs(d + omega_guess) < 0.5 * omega_guess
    if not (blue_zone.any() and red_zone.any()):
        raise FitError("spectrum does not cover both sidebands")
    i_blue = np.flatnonzero(blue_zone)[np.argmax(y[blue_zone])]
    blue_amp = max(float(y[i_blue]), 1e-3)
    ratio = float(max(y[red_zone].max(), 0.0) / blue_amp)
    half = y[blue_zone] > 0.5 * blue_amp
    width = max(float(half.sum()) * step, 3 * step)
    return [carrier_amp, width, blue_amp, min(ratio, 0.9), width, float(d[i_blue])]


def _fit(d, y, sigma, p0, fixed_ratio=None):
    """curve_fit wrapper; with ``fixed_ratio`` the ratio parameter is held."""
    if fixed_ratio is None:
        f = spectrum_model
        guess = p0
    else:
        def f(d, ca, cw, ba, sw, sf):
            return spectrum_model(d, ca, cw, ba, fixed_ratio, sw, sf)

        guess = [p0[0], p0[1], p0[2], p0[4], p0[5]]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OptimizeWarning)
        popt, pcov, info, msg, ier = curve_fit(
            f, d, y, p0=guess, sigma=sigma, absolute_sigma=sigma is not None,
            full_output=True, maxfev=20000,
        )
    if ier not in (1, 2, 3, 4):
        raise ConvergenceError(f"spectrum fit did not converge: {msg}", {"ier": ier, "nfev": info["nfev"]})
    resid = (y - f(d, *popt)) / (1.0 if sigma is None else sigma)
    return popt, pcov, float(resid @ resid)


def fit_sidebands(spectrum, omega_guess=None, profile=True):
    """Fit the spectrum and convert the sideband ratio into nbar and p0.

    The width of the nbar interval comes from a profile likelihood in the ratio
    (delta chi^2 = 1, ratio clipped at 0), so it is asymmetric near nbar = 0.
    For binomial data (``spectrum.shots`` set) the point uncertainties are
    re-derived from the fitted model and the fit repeated until the parameters
    settle; at convergence this solves the binomial likelihood equations and
    avoids the low-count bias of data-derived weights.

    Raises:
        FitInvalidError: fitted ratio >= 1.
        ConvergenceError: optimiser failure.
    """
    d_scale = 2 * np.pi * 1e3  # fit in kHz for conditioning
    d = spectrum.detunings / d_scale
    y = spectrum.transfer
    if omega_guess is None:
        omega_guess = spectrum.meta.get("omega") or 0.5 * spectrum.detunings.max()
    weighted = bool(np.any(spectrum.uncertainty > 0))
    if weighted and np.any(spectrum.uncertainty <= 0):
        raise DomainError("weighted spectra need strictly positive uncertainties")
    sigma = spectrum.uncertainty.copy() if weighted else None

    try:
        guess = _initial_guess(SidebandSpectrum(d, y, spectrum.uncertainty), omega_guess / d_scale)
        popt, pcov, chi2 = _fit(d, y, sigma, guess)
        if weighted and spectrum.shots:
            for _ in range(MAX_REWEIGHT):
                sigma = binomial_sigma(np.clip(spectrum_model(d, *popt), 0, 1), spectrum.shots, _MODEL_FLOOR)
                previous = popt
                popt, pcov, chi2 = _fit(d, y, sigma, popt)
                if np.allclose(popt, previous, rtol=1e-8, atol=1e-10):
                    break
    except (RuntimeError, ValueError) as exc:
        if isinstance(exc, FitError):
            raise
        raise ConvergenceError(f"spectrum fit failed: {exc}") from exc

    ca, cw, ba, r, sw, sf = popt
    if not np.all(np.isfinite(pcov)):
        raise ConvergenceError("fit covariance is not finite", {"popt": popt.tolist()})
    cw, sw, sf = abs(cw), abs(sw), abs(sf)
    if ba <= 0:
        raise FitInvalidError(f"blue sideband height is not positive ({ba:.3g})")
    if r >= 1:
        raise FitInvalidError(f"sideband ratio {r:.3f} >= 1: ratio thermometry does not apply")
    for center in (sf, -sf):
        if np.sum(np.abs(d - center) <= sw) < MIN_POINTS_PER_PEAK:
            raise FitError(f"fewer than {MIN_POINTS_PER_PEAK} points across the sideband at {center:.3g} kHz")

    r_err = float(np.sqrt(pcov[3, 3]))
    ba_err = float(np.sqrt(pcov[2, 2]))
    # red height = r * ba
    ra_err = float(np.sqrt(ba**2 * pcov[3, 3] + r**2 * pcov[2, 2] + 2 * r * ba * pcov[2, 3]))
    r_hat = max(float(r), 0.0)

    if weighted and profile:
        r_lo, r_hi = _profile_interval(d, y, sigma, popt, chi2, r_err)
    else:
        r_lo, r_hi = max(r_hat - r_err, 0.0), r_hat + r_err

    nbar = ratio_to_nbar(r_hat)
    nbar_hi = ratio_to_nbar(r_hi) if r_hi < 1 else np.inf
    ndof = d.size - len(popt)
    return ThermometryFit(
        nbar=nbar,
        nbar_err_lo=nbar - ratio_to_nbar(r_lo),
        nbar_err_hi=nbar_hi - nbar,
        p0=1.0 - r_hat,
        p0_err_lo=r_hi - r_hat,
        p0_err_hi=r_hat - r_lo,
        ratio=float(r),
        ratio_err=r_err,
        nbar_err=r_err / (1.0 - r_hat) ** 2,
        red_amp=float(r * ba),
        blue_amp=float(ba),
        red_amp_err=ra_err,
        blue_amp_err=ba_err,
        carrier_amp=float(ca),
        carrier_width=cw * d_scale,
        sideband_width=sw * d_scale,
        sideband_freq=sf * d_scale,
        chi2=chi2,
        ndof=ndof,
    )


def _profile_interval(d, y, sigma, popt, chi2_min, r_err):
    """Ratio interval where the profiled chi^2 rises by at most 1 (ratio >= 0)."""

    def excess(r):
        _, _, chi2 = _fit(d, y, sigma, popt, fixed_ratio=r)
        return chi2 - chi2_min - 1.0

    r_fit = float(popt[3])
    r_hat = max(r_fit, 0.0)
    scale = max(r_err, 1e-6)

    hi = r_hat + scale
    excess_hi = excess(hi)
    while excess_hi < 0 and hi < 1.5:
        hi += 2 * scale
        excess_hi = excess(hi)
    r_hi = brentq(excess, r_fit, hi, xtol=1e-6 * scale) if excess_hi > 0 else hi

    if r_fit <= 0 or excess(0.0) <= 0:
        r_lo = 0.0
    else:
        r_lo = brentq(excess, 0.0, r_fit, xtol=1e-6 * scale)
    log.debug("profile interval for ratio: [%.5f, %.5f] around %.5f", r_lo, r_hi, r_fit)
    return r_lo, r_hi
