"""Monte Carlo phase-space dynamics of the atom under continuous scattering.

Each trajectory is a point (x, p) drawn from the Gaussian Wigner function of the
initial state. Between scattering events it rotates exactly in the harmonic
trap. An event is an absorption kick, an exponentially distributed excited
interval in the (anti-)trapping excited-state potential, then an emission kick
whose axial projection follows the chosen emission pattern.

Random numbers come from :mod:`recoilslit.rng`, keyed by (seed, trajectory
index, event index), so results do not depend on the number of workers.
"""

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng
from .constants import DEFAULT_CONSTANTS, MHZ
from .errors import DomainError
from .physics import MotionalState

log = logging.getLogger(__name__)

# hard cap on lockstep iterations, protects against rate * duration typos
MAX_EVENTS = 1_000_000


class EmissionPattern(str, enum.Enum):
    ISOTROPIC = "isotropic"
    DIPOLE = "dipole"
    AXIAL_ONLY = "axial_only"


@dataclass(frozen=True)
class ScatteringParams:
    """Scattering settings.

    ``rate`` is the rate of excitation events out of the ground state [1/s].
    ``saturation`` is bookkeeping only; the rate is never derived from it.
    ``antitrap_factor`` multiplies the trap curvature while excited (-1 means an
    inverted potential of equal strength, 0 free flight, 1 no change).
    """

    rate: float = 6.7 * MHZ
    saturation: float = 0.1
    excited_lifetime: float = DEFAULT_CONSTANTS.excited_lifetime
    antitrap_factor: float = -1.0
    emission_pattern: EmissionPattern = EmissionPattern.DIPOLE
    axial_projection: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "emission_pattern", EmissionPattern(self.emission_pattern))
        values = (self.rate, self.saturation, self.excited_lifetime, self.antitrap_factor, self.axial_projection)
        if not all(np.isfinite(v) for v in values):
            raise DomainError("scattering parameters must be finite")
        if self.rate < 0:
            raise DomainError(f"rate must be >= 0, got {self.rate}")
        if self.saturation < 0:
            raise DomainError(f"saturation must be >= 0, got {self.saturation}")
        if self.excited_lifetime <= 0:
            raise DomainError(f"excited_lifetime must be > 0, got {self.excited_lifetime}")
        if not 0 < self.axial_projection <= 1:
            raise DomainError(f"axial_projection must lie in (0, 1], got {self.axial_projection}")


@dataclass(frozen=True)
class Ensemble:
    """Phase-space samples of independent trajectories.

    ``excited`` marks trajectories that are in the excited state at ``time``
    (an event interrupted by the end of an evolution call).
    """

    x: np.ndarray
    p: np.ndarray
    time: float
    seed: int
    omega: float
    mass: float
    excited: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if x.ndim != 1 or x.shape != p.shape or x.size < 1:
            raise DomainError("ensemble needs matching 1-d x and p arrays with at least one sample")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise DomainError("ensemble coordinates must be finite")
        excited = np.zeros(x.shape, bool) if self.excited is None else np.asarray(self.excited, bool)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "excited", excited)

    def __len__(self):
        return self.x.size

    @property
    def samples(self):
        return np.column_stack([self.x, self.p])

    def mean_energy(self):
        """Mean of p^2/2m + m w^2 x^2/2 over the samples (includes coherent motion)."""
        return float(np.mean(self.p**2) / (2 * self.mass) + 0.5 * self.mass * self.omega**2 * np.mean(self.x**2))

    def thermal_nbar(self, hbar=DEFAULT_CONSTANTS.hbar):
        """Phonon number of the Gaussian state with the same variances.

        Uses central moments so a coherent displacement of the whole ensemble
        (e.g. from the mean radiation-pressure force) is not counted as heat.
        """
        var_x = np.var(self.x)
        var_p = np.var(self.p)
        return float((var_p / (self.mass * self.omega) + self.mass * self.omega * var_x) / (2 * hbar) - 0.5)


@dataclass(frozen=True)
class VisibilitySeries:
    bin_edges: np.ndarray
    visibility: np.ndarray
    stderr: np.ndarray
    nbar: np.ndarray
    nbar_stderr: np.ndarray

    def rows(self):
        for i in range(len(self.visibility)):
            yield (self.bin_edges[i], self.bin_edges[i + 1], self.visibility[i], self.stderr[i],
                   self.nbar[i], self.nbar_stderr[i])


def sample_wigner(state, n, seed, constants=DEFAULT_CONSTANTS):
    """Draw ``n`` phase-space points from the Gaussian Wigner function of ``state``."""
    n = int(n)
    if n < 1:
        raise DomainError(f"need at least one sample, got n={n}")
    gx, gp = rng.normals(seed, rng.TAG_SAMPLE, np.arange(n, dtype=np.uint64), 0)
    return Ensemble(
        x=gx * state.delta_x,
        p=gp * state.delta_p,
        time=0.0,
        seed=int(seed),
        omega=state.omega,
        mass=state.mass,
    )


def _rotate(x, p, omega, mass, dt):
    """Exact harmonic evolution over dt."""
    c = np.cos(omega * dt)
    s = np.sin(omega * dt)
    mw = mass * omega
    return x * c + p * s / mw, p * c - x * s * mw


def _excited_propagate(x, p, omega, mass, factor, dt):
    """Evolution in a potential of curvature ``factor * m omega^2``."""
    if factor > 0:
        return _rotate(x, p, omega * np.sqrt(factor), mass, dt)
    if factor == 0:
        return x + p * dt / mass, p
    kappa = omega * np.sqrt(-factor)
    ch = np.cosh(kappa * dt)
    sh = np.sinh(kappa * dt)
    mk = mass * kappa
    return x * ch + p * sh / mk, p * ch + x * sh * mk


def emission_projection(u, pattern):
    """Axial direction cosine of an emitted photon from a uniform deviate ``u``.

    dipole: density (3/8)(1 + c^2) on [-1, 1] (sigma+ emission about the axis),
    inverted in closed form by Cardano's formula.
    """
    pattern = EmissionPattern(pattern)
    if pattern is EmissionPattern.ISOTROPIC:
        return 2.0 * u - 1.0
    if pattern is EmissionPattern.AXIAL_ONLY:
        return np.where(u < 0.5, -1.0, 1.0)
    # CDF(c) = (3/8)(c + c^3/3) + 1/2 -> c^3 + 3c - q = 0 with q = 8u - 4
    q = 8.0 * u - 4.0
    root = np.sqrt(q * q / 4.0 + 1.0)
    return np.cbrt(q / 2.0 + root) + np.cbrt(q / 2.0 - root)


def _evolve_chunk(x, p, excited, index, duration, omega, mass, scat, hbar_k, seed):
    """Event-driven propagation of one block of trajectories (in place)."""
    remaining = np.full(x.shape, float(duration))
    active = np.ones(x.shape, bool) if duration > 0 else np.zeros(x.shape, bool)
    kick = hbar_k * scat.axial_projection
    step = 0
    while active.any():
        if step >= MAX_EVENTS:
            raise DomainError("event cap exceeded; check rate and duration")
        sel = np.flatnonzero(active)
        u_wait, u_life, u_dir, _ = rng.uniforms(seed, rng.TAG_EVOLVE, index[sel], step)
        xs, ps, ex, rem = x[sel], p[sel], excited[sel], remaining[sel]

        # ground state: harmonic rotation until the next absorption
        g = ~ex
        if g.any():
            if scat.rate > 0:
                wait = -np.log1p(-u_wait[g]) / scat.rate
            else:
                wait = np.full(int(g.sum()), np.inf)
            dt = np.minimum(wait, rem[g])
            xs[g], ps[g] = _rotate(xs[g], ps[g], omega, mass, dt)
            absorbed = wait < rem[g]
            rem[g] = np.where(absorbed, rem[g] - dt, 0.0)
            gi = np.flatnonzero(g)[absorbed]
            ps[gi] += kick
            ex[gi] = True

        # excited state: (anti-)trapped interval, then emission
        e = ex & (rem > 0)
        if e.any():
            life = -np.log1p(-u_life[e]) * scat.excited_lifetime
            dt = np.minimum(life, rem[e])
            xs[e], ps[e] = _excited_propagate(xs[e], ps[e], omega, mass, scat.antitrap_factor, dt)
            emitted = life < rem[e]
            rem[e] = np.where(emitted, rem[e] - dt, 0.0)
            ei = np.flatnonzero(e)[emitted]
            ps[ei] -= hbar_k * emission_projection(u_dir[e][emitted], scat.emission_pattern)
            ex[ei] = False

        x[sel], p[sel], excited[sel], remaining[sel] = xs, ps, ex, rem
        active = remaining > 0
        step += 1
    return step


def evolve(ensemble, duration, trap, scat, seed, constants=DEFAULT_CONSTANTS, workers=1, chunk_size=None):
    """Propagate every trajectory for ``duration`` seconds.

    The trap frequency is the axial frequency of ``trap``. Trajectories are
    split into contiguous blocks that may run on ``workers`` threads; each
    trajectory's random stream is keyed by (seed, index) only.
    """
    if not np.isfinite(duration) or duration < 0:
        raise DomainError(f"duration must be finite and >= 0, got {duration}")
    omega = trap.axial_freq
    x = ensemble.x.copy()
    p = ensemble.p.copy()
    excited = ensemble.excited.copy()
    n = x.size
    index = np.arange(n, dtype=np.uint64)

    workers = max(1, int(workers))
    chunk = chunk_size or max(1, -(-n // workers))
    bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]

    def run(bound):
        lo, hi = bound
        xs, ps, es = x[lo:hi], p[lo:hi], excited[lo:hi]
        steps = _evolve_chunk(xs, ps, es, index[lo:hi], duration, omega, ensemble.mass, scat, constants.hbar_k, seed)
        x[lo:hi], p[lo:hi], excited[lo:hi] = xs, ps, es
        return steps

    if workers == 1 or len(bounds) == 1:
        steps = [run(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            steps = list(pool.map(run, bounds))
    log.debug("evolved %d trajectories for %.3g s in %d lockstep events", n, duration, max(steps, default=0))
    return replace(ensemble, x=x, p=p, excited=excited, time=ensemble.time + duration, omega=omega)


def visibility_estimator(ensemble, k_axial=DEFAULT_CONSTANTS.k):
    """|<exp(2 i k x)>| over the ensemble with a jackknife standard error.

    Returns:
        (V, stderr)
    """
    n = len(ensemble)
    if n < 1:
        raise DomainError("empty ensemble")
    z = np.exp(2j * k_axial * ensemble.x)
    zbar = z.mean()
    v = abs(zbar)
    if n < 2:
        return float(v), float("nan")
    loo = np.abs((n * zbar - z) / (n - 1))
    stderr = np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(v), float(stderr)


def _nbar_stderr(ensemble, hbar):
    """Delta-method standard error of :meth:`Ensemble.thermal_nbar`."""
    n = len(ensemble)
    mw = ensemble.mass * ensemble.omega
    dx = ensemble.x - ensemble.x.mean()
    dp = ensemble.p - ensemble.p.mean()
    per_sample = (dp**2 / mw + mw * dx**2) / (2 * hbar)
    return float(np.std(per_sample, ddof=1) / np.sqrt(n))


def time_binned_visibility(
    state,
    trap,
    scat,
    total_time,
    bin_width,
    n,
    seed,
    constants=DEFAULT_CONSTANTS,
    workers=1,
    snapshot=None,
):
    """Visibility and phonon number per time bin.

    Each bin is sampled at its centre: the ensemble is evolved half a bin, then
    one bin width at a time, and the static estimator is applied to the
    instantaneous distribution.

    Args:
        snapshot: optional callback ``snapshot(bin_index, ensemble)`` called at
            every bin centre (used to export Wigner histograms).
    """
    n = int(n)
    if n < 1000:
        raise DomainError(f"need n >= 1000 trajectories, got {n}")
    if not (total_time > 0 and bin_width > 0):
        raise DomainError("total_time and bin_width must be > 0")
    n_bins = int(round(total_time / bin_width))
    if n_bins < 1 or abs(n_bins * bin_width - total_time) > 1e-9 * total_time:
        raise DomainError(f"bin_width {bin_width} does not divide total_time {total_time}")

    ensemble = sample_wigner(state, n, seed, constants)
    k_axial = constants.k * scat.axial_projection
    vis, err, nbar, nbar_err = [], [], [], []
    for b in range(n_bins):
        step = 0.5 * bin_width if b == 0 else bin_width
        ensemble = evolve(ensemble, step, trap, scat, rng.derive_seed(seed, b), constants, workers)
        v, s = visibility_estimator(ensemble, k_axial)
        vis.append(v)
        err.append(s)
        nbar.append(ensemble.thermal_nbar(constants.hbar))
        nbar_err.append(_nbar_stderr(ensemble, constants.hbar))
        if snapshot is not None:
            snapshot(b, ensemble)
    return VisibilitySeries(
        bin_edges=np.arange(n_bins + 1) * bin_width,
        visibility=np.array(vis),
        stderr=np.array(err),
        nbar=np.array(nbar),
        nbar_stderr=np.array(nbar_err),
    )


def wigner_histogram(ensemble, x_range, p_range, bins):
    """Normalised 2-D histogram of the samples.

    Returns:
        (density, x_edges, p_edges); density sums to 1 over samples inside the
        range.
    """
    bx, bp = (bins, bins) if np.isscalar(bins) else bins
    if bx < 2 or bp < 2:
        raise DomainError("need at least 2 bins per axis")
    for name, (lo, hi) in (("x_range", x_range), ("p_range", p_range)):
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise DomainError(f"degenerate {name}: {(lo, hi)}")
    hist, xe, pe = np.histogram2d(ensemble.x, ensemble.p, bins=(bx, bp), range=(x_range, p_range))
    total = hist.sum()
    if total == 0:
        raise DomainError("no samples inside the histogram range")
    return hist / total, xe, pe


def initial_state(trap, nbar=0.0, constants=DEFAULT_CONSTANTS):
    return MotionalState.in_trap(trap, nbar, constants)
