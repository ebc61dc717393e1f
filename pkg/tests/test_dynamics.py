import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from recoilslit import DomainError
from recoilslit.constants import DEFAULT_CONSTANTS as C
from recoilslit.dynamics import (
    Ensemble,
    ScatteringParams,
    emission_projection,
    evolve,
    sample_wigner,
    time_binned_visibility,
    visibility_estimator,
    wigner_histogram,
)
from recoilslit.physics import MotionalState, TrapModel, eta, eta_eff, visibility

US = 1e-6
RATE = 6.7e6
GAMMA = 1 / C.excited_lifetime


@pytest.fixture(scope="module")
def loose_trap():
    # ~12 Hz: the motion is frozen over a few microseconds
    return TrapModel.from_momentum_anchor(1e-6)


def two_level_absorptions(rate, gamma, t):
    """Expected absorptions in [0, t] for a two-state chain starting in the ground state."""
    s = rate + gamma
    return rate * gamma * t / s + rate**2 / s**2 * (1 - np.exp(-s * t))


def two_level_excited(rate, gamma, t):
    s = rate + gamma
    return rate / s * (1 - np.exp(-s * t))


class TestScatteringParams:
    def test_defaults(self):
        sp = ScatteringParams()
        assert sp.rate == pytest.approx(6.7e6)
        assert sp.excited_lifetime == pytest.approx(1 / (2 * np.pi * 6.07e6))
        assert sp.emission_pattern == "dipole"

    @pytest.mark.parametrize(
        "kwargs",
        [{"rate": -1}, {"saturation": -0.1}, {"excited_lifetime": 0}, {"axial_projection": 0},
         {"axial_projection": 1.2}, {"rate": np.nan}, {"emission_pattern": "sideways"}],
    )
    def test_rejects(self, kwargs):
        with pytest.raises((DomainError, ValueError)):
            ScatteringParams(**kwargs)


class TestSampling:
    def test_moments(self, ground):
        ens = sample_wigner(ground, 200_000, 4)
        assert np.std(ens.x) == pytest.approx(ground.delta_x, rel=0.01)
        assert np.std(ens.p) == pytest.approx(ground.delta_p, rel=0.01)
        assert ens.thermal_nbar() == pytest.approx(0.0, abs=0.01)

    def test_thermal_nbar_recovered(self, ground):
        warm = MotionalState(ground.omega, 0.37)
        assert sample_wigner(warm, 200_000, 5).thermal_nbar() == pytest.approx(0.37, abs=0.01)

    def test_deterministic(self, ground):
        a = sample_wigner(ground, 1000, 8)
        b = sample_wigner(ground, 1000, 8)
        np.testing.assert_array_equal(a.samples, b.samples)
        assert not np.array_equal(a.x, sample_wigner(ground, 1000, 9).x)

    def test_rejects_empty(self, ground):
        with pytest.raises(DomainError):
            sample_wigner(ground, 0, 1)

    def test_ensemble_validation(self):
        with pytest.raises(DomainError):
            Ensemble(np.zeros(3), np.zeros(2), 0.0, 0, 1.0, 1.0)
        with pytest.raises(DomainError):
            Ensemble(np.array([np.nan]), np.zeros(1), 0.0, 0, 1.0, 1.0)


class TestEstimator:
    @pytest.mark.parametrize("nbar", [0.0, 0.37])
    def test_agrees_with_closed_form(self, ground, nbar):
        state = MotionalState(ground.omega, nbar)
        v, s = visibility_estimator(sample_wigner(state, 100_000, 12))
        expected = visibility(eta_eff(eta(ground.delta_p0), nbar))
        assert abs(v - expected) < 3 * s

    def test_stderr_matches_seed_scatter(self, ground):
        runs = [visibility_estimator(sample_wigner(ground, 2000, s)) for s in range(60)]
        v = np.array([r[0] for r in runs])
        s = np.array([r[1] for r in runs])
        assert 0.7 < np.std(v, ddof=1) / s.mean() < 1.4

    def test_translation_changes_phase_not_magnitude(self, ground):
        ens = sample_wigner(ground, 5000, 2)
        shifted = Ensemble(ens.x + 0.123e-6, ens.p, 0.0, 0, ens.omega, ens.mass)
        assert visibility_estimator(shifted)[0] == pytest.approx(visibility_estimator(ens)[0], rel=1e-10)

    def test_single_sample(self):
        v, s = visibility_estimator(Ensemble([0.0], [0.0], 0.0, 0, 1.0, 1.0))
        assert v == 1.0 and np.isnan(s)


class TestEmissionProjection:
    @pytest.mark.parametrize("pattern", ["isotropic", "dipole", "axial_only"])
    def test_range_and_symmetry(self, pattern):
        u = np.linspace(0, 1, 10001)[:-1]
        c = emission_projection(u, pattern)
        assert np.all(np.abs(c) <= 1 + 1e-12)
        assert np.all(np.diff(c) >= 0)

    def test_dipole_inverts_cdf(self):
        u = np.linspace(0, 1, 1001)
        c = emission_projection(u, "dipole")
        cdf = 0.375 * (c + c**3 / 3) + 0.5
        np.testing.assert_allclose(cdf, u, atol=1e-12)

    def test_dipole_distribution(self):
        u = np.random.default_rng(0).random(200_000)
        c = emission_projection(u, "dipole")
        second = integrate.quad(lambda x: x**2 * 0.375 * (1 + x**2), -1, 1)[0]
        assert second == pytest.approx(0.4)
        assert np.mean(c**2) == pytest.approx(second, abs=0.004)
        assert abs(np.mean(c)) < 0.005

    def test_isotropic_uniform(self):
        c = emission_projection(np.random.default_rng(1).random(50_000), "isotropic")
        assert stats.kstest(c, "uniform", args=(-1, 2)).pvalue > 1e-3


class TestEvolve:
    def test_zero_rate_is_harmonic(self, deep_trap, ground):
        ens = sample_wigner(MotionalState(ground.omega, 0.2), 5000, 1)
        period = 2 * np.pi / deep_trap.axial_freq
        out = evolve(ens, period, deep_trap, ScatteringParams(rate=0.0), 1)
        np.testing.assert_allclose(out.x, ens.x, atol=1e-12 * np.abs(ens.x).max())
        np.testing.assert_allclose(out.p, ens.p, atol=1e-12 * np.abs(ens.p).max())
        quarter = evolve(ens, period / 4, deep_trap, ScatteringParams(rate=0.0), 1)
        mw = ens.mass * ens.omega
        np.testing.assert_allclose(quarter.x, ens.p / mw, rtol=1e-9, atol=1e-20)
        assert quarter.mean_energy() == pytest.approx(ens.mean_energy(), rel=1e-12)

    def test_zero_duration_identity(self, deep_trap, ground):
        ens = sample_wigner(ground, 1000, 1)
        out = evolve(ens, 0.0, deep_trap, ScatteringParams(), 1)
        np.testing.assert_array_equal(out.x, ens.x)
        assert not out.excited.any()

    def test_rejects_negative_duration(self, deep_trap, ground):
        with pytest.raises(DomainError):
            evolve(sample_wigner(ground, 10, 1), -1e-6, deep_trap, ScatteringParams(), 1)

    @pytest.mark.parametrize("pattern", ["isotropic", "dipole", "axial_only"])
    def test_absorption_count_matches_two_level_chain(self, loose_trap, pattern):
        state = MotionalState.in_trap(loose_trap)
        ens = sample_wigner(state, 20_000, 1)
        out = evolve(ens, 2 * US, loose_trap, ScatteringParams(emission_pattern=pattern), 3)
        kicks = (out.p - ens.p) / C.hbar_k
        expected = two_level_absorptions(RATE, GAMMA, 2 * US)
        assert abs(kicks.mean() - expected) < 4 * kicks.std() / np.sqrt(kicks.size)
        pe = two_level_excited(RATE, GAMMA, 2 * US)
        assert abs(out.excited.mean() - pe) < 4 * np.sqrt(pe * (1 - pe) / kicks.size)

    def test_excited_flag_carries_across_calls(self, loose_trap):
        state = MotionalState.in_trap(loose_trap)
        ens = sample_wigner(state, 20_000, 1)
        out = ens
        for i in range(4):
            out = evolve(out, 0.5 * US, loose_trap, ScatteringParams(), 100 + i)
        kicks = (out.p - ens.p) / C.hbar_k
        expected = two_level_absorptions(RATE, GAMMA, 2 * US)
        assert abs(kicks.mean() - expected) < 4 * kicks.std() / np.sqrt(kicks.size)
        assert out.time == pytest.approx(2 * US)

    def test_deterministic(self, deep_trap, ground):
        ens = sample_wigner(ground, 3000, 1)
        a = evolve(ens, 3 * US, deep_trap, ScatteringParams(), 5)
        b = evolve(ens, 3 * US, deep_trap, ScatteringParams(), 5)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.p, b.p)

    @pytest.mark.parametrize("workers, chunk", [(1, 97), (3, None), (4, 500)])
    def test_partition_invariant(self, deep_trap, ground, workers, chunk):
        ens = sample_wigner(ground, 2000, 1)
        ref = evolve(ens, 2 * US, deep_trap, ScatteringParams(), 5)
        out = evolve(ens, 2 * US, deep_trap, ScatteringParams(), 5, workers=workers, chunk_size=chunk)
        np.testing.assert_array_equal(ref.x, out.x)
        np.testing.assert_array_equal(ref.p, out.p)
        np.testing.assert_array_equal(ref.excited, out.excited)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**32))
    def test_heating_increases_nbar(self, deep_trap, ground, seed):
        ens = sample_wigner(ground, 2000, seed)
        out = evolve(ens, 3 * US, deep_trap, ScatteringParams(), seed)
        assert out.thermal_nbar() > ens.thermal_nbar() + 0.5


@pytest.fixture(scope="module")
def series(deep_trap, ground):
    return time_binned_visibility(ground, deep_trap, ScatteringParams(), 6 * US, 1 * US, 20_000, 7)


class TestTimeBinned:
    def test_shape(self, series):
        assert len(series.visibility) == 6
        np.testing.assert_allclose(series.bin_edges, np.arange(7) * US)
        assert len(list(series.rows())) == 6

    def test_decays_and_heats(self, series):
        assert series.visibility[0] < visibility(0.3125) + 3 * series.stderr[0]
        assert np.all(np.diff(series.visibility) <= 2 * series.stderr[1:])
        assert np.all(np.diff(series.nbar) > 0)

    def test_no_scattering_is_stationary(self, deep_trap, ground):
        s = time_binned_visibility(ground, deep_trap, ScatteringParams(rate=0.0), 3 * US, 1 * US, 5000, 7)
        assert np.all(np.abs(s.visibility - visibility(0.3125)) < 4 * s.stderr)
        np.testing.assert_allclose(s.nbar, s.nbar[0], atol=0.05)

    def test_snapshot_called_per_bin(self, deep_trap, ground):
        seen = []
        time_binned_visibility(ground, deep_trap, ScatteringParams(), 2 * US, 1 * US, 1000, 1,
                               snapshot=lambda b, e: seen.append((b, e.time)))
        assert [b for b, _ in seen] == [0, 1]
        assert seen[0][1] == pytest.approx(0.5 * US)
        assert seen[1][1] == pytest.approx(1.5 * US)

    @pytest.mark.parametrize("kwargs", [{"n": 999}, {"bin_width": 0.7 * US}, {"total_time": 0.0}])
    def test_rejects(self, deep_trap, ground, kwargs):
        args = dict(total_time=2 * US, bin_width=1 * US, n=1000)
        args.update(kwargs)
        with pytest.raises(DomainError):
            time_binned_visibility(ground, deep_trap, ScatteringParams(), seed=1, **args)


class TestWignerHistogram:
    def test_normalised(self, ground):
        ens = sample_wigner(ground, 10_000, 1)
        dens, xe, pe = wigner_histogram(ens, (-2e-6, 2e-6), (-10 * C.hbar_k, 10 * C.hbar_k), 21)
        assert dens.shape == (21, 21)
        assert dens.sum() == pytest.approx(1.0)
        assert len(xe) == len(pe) == 22

    def test_rejects(self, ground):
        ens = sample_wigner(ground, 100, 1)
        with pytest.raises(DomainError):
            wigner_histogram(ens, (1, 1), (0, 1), 10)
        with pytest.raises(DomainError):
            wigner_histogram(ens, (0, 1), (0, 1), 1)
        with pytest.raises(DomainError):
            wigner_histogram(ens, (1.0, 2.0), (1.0, 2.0), 10)
