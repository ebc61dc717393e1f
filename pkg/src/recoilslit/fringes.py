"""Single-photon interference fringes: synthesis, sinusoidal fit, visibility budget.

The observable is the count unbalance u = (C1 - C2) / (C1 + C2) of the two
interferometer outputs; its expectation is V cos(phi + phi0) + b.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FitError
from .physics import eta_eff as _eta_eff, visibility as _visibility

log = logging.getLogger(__name__)

MAX_REWEIGHT = 10


@dataclass(frozen=True)
class FringeDataset:
    phases: np.ndarray
    counts_1: np.ndarray
    counts_2: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        c1 = np.asarray(self.counts_1, dtype=float)
        c2 = np.asarray(self.counts_2, dtype=float)
        if not (phases.ndim == 1 and phases.shape == c1.shape == c2.shape):
            raise DomainError("phases and counts must be 1-d arrays of equal length")
        if np.any(c1 < 0) or np.any(c2 < 0) or not np.all(np.isfinite(c1 + c2 + phases)):
            raise DomainError("counts must be finite and >= 0")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "counts_1", c1)
        object.__setattr__(self, "counts_2", c2)

    @property
    def total(self):
        return self.counts_1 + self.counts_2

    def unbalance(self):
        """(C1 - C2) / (C1 + C2); NaN where no counts were recorded."""
        total = self.total
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, (self.counts_1 - self.counts_2) / total, np.nan)


@dataclass(frozen=True)
class FringeFit:
    visibility: float
    visibility_err: float
    phase_offset: float
    phase_offset_err: float
    baseline: float
    baseline_err: float
    chi2: float
    ndof: int
    covariance: np.ndarray = field(repr=False, default=None)
    bootstrap_err: float = None

    def report(self):
        out = {
            "visibility": self.visibility,
            "visibility_err": self.visibility_err,
            "phase_offset": self.phase_offset,
            "phase_offset_err": self.phase_offset_err,
            "baseline": self.baseline,
            "baseline_err": self.baseline_err,
            "chi2": self.chi2,
            "ndof": self.ndof,
        }
        if self.bootstrap_err is not None:
            out["visibility_err_bootstrap"] = self.bootstrap_err
        return out


def dephasing_factor(phase_noise_rms):
    """Visibility factor exp(-sigma^2 / 2) from Gaussian phase jitter."""
    sigma = np.asarray(phase_noise_rms, dtype=float)
    if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
        raise DomainError("phase noise rms must be finite and >= 0")
    out = np.exp(-0.5 * sigma**2)
    return float(out) if out.ndim == 0 else out


def synthesize_fringe(V, phase_offset=0.0, n_points=20, mean_counts=1000, phase_noise_rms=0.0, seed=None):
    """Fringe scan over one period.

    Each point receives ``mean_counts`` expected detections in total, split
    between the arms as (1 +- V cos(phi + phi0 + jitter)) / 2 with Gaussian
    jitter of ``phase_noise_rms``. ``seed=None`` returns the expected (non-integer)
    counts without jitter or Poisson noise.
    """
    if not (0.0 <= V <= 1.0):
        raise DomainError(f"visibility must lie in [0, 1], got {V}")
    if n_points < 4:
        raise DomainError("need at least 4 phase points")
    if mean_counts < 1:
        raise DomainError("mean_counts must be >= 1")
    phases = np.linspace(0.0, 2 * np.pi, int(n_points), endpoint=False)
    meta = {"visibility_true": float(V), "phase_offset_true": float(phase_offset),
            "phase_noise_rms": float(phase_noise_rms)}
    if seed is None:
        if phase_noise_rms:
            # expected counts already average over the jitter
            V = V * dephasing_factor(phase_noise_rms)
        u = V * np.cos(phases + phase_offset)
        return FringeDataset(phases, mean_counts * (1 + u) / 2, mean_counts * (1 - u) / 2, meta)

    gen = np.random.default_rng(seed)
    jitter = gen.normal(0.0, phase_noise_rms, phases.shape) if phase_noise_rms > 0 else 0.0
    u = V * np.cos(phases + phase_offset + jitter)
    c1 = gen.poisson(mean_counts * (1 + u) / 2)
    c2 = gen.poisson(mean_counts * (1 - u) / 2)
    return FringeDataset(phases, c1, c2, meta)


def _design(phases):
    return np.column_stack([np.cos(phases), np.sin(phases), np.ones_like(phases)])


def _solve(design, u, var):
    w = 1.0 / var
    a = design.T @ (design * w[:, None])
    b = design.T @ (u * w)
    cov = np.linalg.inv(a)
    coef = cov @ b
    return coef, cov


def fit_unbalance(phases, u, total):
    """Weighted linear least squares of u = A cos(phi + phi0) + b.

    The variance of each point is the binomial (1 - u^2) / N evaluated on the
    fitted curve, iterated to convergence (starting from the data).

    Returns:
        FringeFit.
    """
    phases = np.asarray(phases, dtype=float)
    u = np.asarray(u, dtype=float)
    total = np.asarray(total, dtype=float)
    if phases.size < 4:
        raise FitError("need at least 4 phase points")
    wrapped = np.sort(np.mod(phases, 2 * np.pi))
    largest_gap = max(np.diff(wrapped).max(), 2 * np.pi - (wrapped[-1] - wrapped[0]))
    if 2 * np.pi - largest_gap <= np.pi:
        raise FitError("phase points must span more than half a period")
    design = _design(phases)
    if np.linalg.matrix_rank(design) < 3:
        raise FitError("rank-deficient design matrix")

    floor = 1.0 / total  # keeps |u| = 1 points finite-weighted
    var = np.maximum(1.0 - u**2, floor) / total
    coef, cov = _solve(design, u, var)
    for _ in range(MAX_REWEIGHT):
        model = design @ coef
        var = np.maximum(1.0 - np.clip(model, -1, 1) ** 2, floor) / total
        new, cov = _solve(design, u, var)
        done = np.allclose(new, coef, rtol=0, atol=1e-13)
        coef = new
        if done:
            break

    a, c, b = coef
    amp = float(np.hypot(a, c))
    phi0 = float(np.arctan2(-c, a))
    if amp > 0:
        # gradients of A = |(a, c)| and phi0 = atan2(-c, a)
        g_amp = np.array([a / amp, c / amp, 0.0])
        g_phi = np.array([c / amp**2, -a / amp**2, 0.0])
        amp_err = float(np.sqrt(g_amp @ cov @ g_amp))
        phi_err = float(np.sqrt(g_phi @ cov @ g_phi))
    else:
        amp_err = float(np.sqrt(0.5 * (cov[0, 0] + cov[1, 1])))
        phi_err = np.pi
    resid = u - design @ coef
    chi2 = float(np.sum(resid**2 / var))
    if amp > 1 + 3 * amp_err:
        raise FitError(f"fitted visibility {amp:.4f} exceeds 1 by more than 3 sigma")
    return FringeFit(amp, amp_err, phi0, phi_err, float(b), float(np.sqrt(cov[2, 2])),
                     chi2, int(phases.size - 3), cov)


def fit_fringe(dataset, bootstrap=0, seed=0):
    """Fit a FringeDataset; points without counts are dropped with a warning.

    Args:
        bootstrap: number of Poisson resampling replicates for a cross-check of
            the visibility error (0 disables). Replicate ``i`` draws from a
            stream keyed by ``(seed, i)``.
    """
    total = dataset.total
    keep = total > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} phase points with zero counts", RuntimeWarning, stacklevel=2)
    phases = dataset.phases[keep]
    c1, c2 = dataset.counts_1[keep], dataset.counts_2[keep]
    fit = fit_unbalance(phases, (c1 - c2) / (c1 + c2), c1 + c2)
    if bootstrap:
        fit = _with_bootstrap(fit, phases, c1, c2, int(bootstrap), seed)
    return fit


def _with_bootstrap(fit, phases, c1, c2, n_rep, seed):
    vis = []
    for i in range(n_rep):
        gen = np.random.default_rng([int(seed), i])
        b1 = gen.poisson(c1)
        b2 = gen.poisson(c2)
        tot = b1 + b2
        ok = tot > 0
        try:
            vis.append(fit_unbalance(phases[ok], (b1[ok] - b2[ok]) / tot[ok], tot[ok]).visibility)
        except FitError:
            log.debug("bootstrap replicate %d rejected", i)
    if len(vis) < 2:
        raise FitError("bootstrap produced fewer than 2 valid replicates")
    return FringeFit(**{**fit.__dict__, "bootstrap_err": float(np.std(vis, ddof=1))})


def visibility_budget(V_quantum, nbar=0.0, phase_noise_rms=0.0):
    """Expected visibility from the ideal ground-state value, heating and phase noise.

    exp(-2 eta^2 (2 nbar + 1)) * exp(-sigma^2 / 2), with exp(-2 eta^2) = V_quantum.
    """
    if not (0 < V_quantum <= 1):
        raise DomainError(f"V_quantum must lie in (0, 1], got {V_quantum}")
    if nbar < 0:
        raise DomainError(f"nbar must be >= 0, got {nbar}")
    if V_quantum == 1:
        thermal = 1.0
    else:
        eta = np.sqrt(-np.log(V_quantum) / 2)
        thermal = _visibility(_eta_eff(eta, nbar))
    return float(thermal * dephasing_factor(phase_noise_rms))
