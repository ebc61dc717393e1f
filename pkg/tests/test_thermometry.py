import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recoilslit import DomainError, FitError, FitInvalidError
from recoilslit.thermometry import (
    SidebandSpectrum,
    binomial_sigma,
    fit_sidebands,
    lorentzian,
    nbar_to_population,
    population_to_nbar,
    ratio_to_nbar,
    spectrum_model,
    synthesize_spectrum,
)

KHZ = 2 * np.pi * 1e3


@pytest.fixture(scope="module")
def omega(deep_trap):
    return deep_trap.axial_freq


WIDTH = 4 * KHZ


class TestConversions:
    @pytest.mark.parametrize("nbar, p0", [(0.0, 1.0), (0.099, 0.90992), (0.0101, 0.99), (1.0, 0.5)])
    def test_values(self, nbar, p0):
        assert nbar_to_population(nbar) == pytest.approx(p0, abs=1e-5)

    def test_reference_pairs_round_to_two_digits(self):
        assert round(nbar_to_population(0.099), 2) == 0.91
        assert round(nbar_to_population(0.0101), 2) == 0.99

    @given(st.floats(0, 1e6))
    def test_inverse(self, nbar):
        assert population_to_nbar(nbar_to_population(nbar)) == pytest.approx(nbar, rel=1e-9, abs=1e-12)

    @given(st.floats(0, 0.999))
    def test_ratio_consistent_with_population(self, r):
        assert nbar_to_population(ratio_to_nbar(r)) == pytest.approx(1 - r, rel=1e-9, abs=1e-12)

    def test_array_input(self):
        np.testing.assert_allclose(nbar_to_population([0.0, 1.0]), [1.0, 0.5])

    @pytest.mark.parametrize("bad", [-0.1, np.nan, np.inf])
    def test_nbar_domain(self, bad):
        with pytest.raises(DomainError):
            nbar_to_population(bad)

    @pytest.mark.parametrize("bad", [0.0, -0.5, 1.01, np.nan])
    def test_population_domain(self, bad):
        with pytest.raises(DomainError):
            population_to_nbar(bad)


class TestModel:
    def test_lorentzian_fwhm(self):
        assert lorentzian(0.0, 2.0, 0.0, 1.0) == 2.0
        assert lorentzian(0.5, 2.0, 0.0, 1.0) == pytest.approx(1.0)

    def test_sideband_heights(self, omega):
        y = spectrum_model(np.array([-omega, omega]), 0.0, WIDTH, 0.5, 0.2, WIDTH, omega)
        # tails of the opposite peak add a little to each
        assert y[1] == pytest.approx(0.5, rel=1e-3)
        assert y[0] == pytest.approx(0.1, rel=5e-3)

    def test_synthesis_heights(self, omega):
        s = synthesize_spectrum(0.25, omega, WIDTH, carrier_amp=0.0, n_points=801)
        i_red = np.argmin(np.abs(s.detunings + omega))
        i_blue = np.argmin(np.abs(s.detunings - omega))
        assert s.transfer[i_red] / s.transfer[i_blue] == pytest.approx(0.2, rel=5e-3)
        assert np.all(s.uncertainty == 0)
        assert s.shots is None

    def test_synthesis_rejects_overfull(self, omega):
        with pytest.raises(DomainError):
            synthesize_spectrum(1.0, omega, WIDTH, sideband_coupling=0.7)

    def test_noisy_synthesis_is_seeded(self, omega):
        a = synthesize_spectrum(0.1, omega, WIDTH, noise_seed=3)
        b = synthesize_spectrum(0.1, omega, WIDTH, noise_seed=3)
        np.testing.assert_array_equal(a.transfer, b.transfer)
        assert a.shots == 200
        assert np.all(a.uncertainty > 0)
        # binomial draws land on multiples of 1/shots
        np.testing.assert_allclose(a.transfer * 200, np.round(a.transfer * 200), atol=1e-9)

    def test_binomial_sigma_floor(self):
        s = binomial_sigma(np.array([0.0, 0.5, 1.0]), 100)
        assert s[0] == pytest.approx(s[2]) and s[0] > 0
        assert s[1] == pytest.approx(0.05)

    @pytest.mark.parametrize(
        "d, y, s",
        [([0, 1], [0.1], [0.1]), ([1, 0], [0.1, 0.1], [0.1, 0.1]), ([0, 1], [0.1, 1.2], [0.1, 0.1]),
         ([0, 1], [0.1, 0.1], [-0.1, 0.1])],
    )
    def test_spectrum_validation(self, d, y, s):
        with pytest.raises(DomainError):
            SidebandSpectrum(np.array(d, float), np.array(y, float), np.array(s, float))


class TestFit:
    @pytest.mark.parametrize("nbar", [0.0, 0.0101, 0.099, 0.37, 1.0, 3.0])
    def test_noiseless_round_trip(self, omega, nbar):
        fit = fit_sidebands(synthesize_spectrum(nbar, omega, WIDTH))
        assert fit.nbar == pytest.approx(nbar, abs=1e-6)
        assert fit.p0 == pytest.approx(nbar_to_population(nbar), abs=1e-6)
        assert fit.sideband_freq == pytest.approx(omega, rel=1e-6)
        assert fit.sideband_width == pytest.approx(WIDTH, rel=1e-5)

    def test_distinct_carrier_width(self, omega):
        s = synthesize_spectrum(0.2, omega, WIDTH, carrier_width=3 * WIDTH)
        fit = fit_sidebands(s)
        assert fit.carrier_width == pytest.approx(3 * WIDTH, rel=1e-5)
        assert fit.nbar == pytest.approx(0.2, abs=1e-6)

    def test_noisy_single(self, omega):
        fit = fit_sidebands(synthesize_spectrum(0.099, omega, WIDTH, noise_seed=1))
        assert fit.p0 == pytest.approx(0.91, abs=0.01)
        assert fit.nbar_err_lo > 0 and fit.nbar_err_hi > 0
        assert fit.chi2 / fit.ndof == pytest.approx(1.0, abs=0.2)

    def test_interval_asymmetric_near_zero(self, omega):
        fit = fit_sidebands(synthesize_spectrum(0.0101, omega, WIDTH, noise_seed=2))
        assert fit.nbar - fit.nbar_err_lo >= 0
        assert fit.nbar_err_hi > 0

    def test_coverage(self, omega):
        truth = 0.099
        hits = 0
        pulls = []
        for seed in range(60):
            fit = fit_sidebands(synthesize_spectrum(truth, omega, WIDTH, noise_seed=seed))
            lo = fit.nbar - fit.nbar_err_lo
            hi = fit.nbar + fit.nbar_err_hi
            hits += lo <= truth <= hi
            pulls.append((fit.ratio - truth / (1 + truth)) / fit.ratio_err)
        # 68% interval over 60 trials: binomial 3 sigma band
        assert 0.68 - 0.18 < hits / 60 < 0.68 + 0.18
        assert 0.7 < np.std(pulls) < 1.3

    def test_inverted_ratio_is_invalid(self, omega):
        d = np.linspace(-1.6 * omega, 1.6 * omega, 801)
        y = spectrum_model(d, 0.3, WIDTH, 0.4, 1.2, WIDTH, omega)
        with pytest.raises(FitInvalidError):
            fit_sidebands(SidebandSpectrum(d, y, np.zeros_like(d), meta={"omega": omega}))

    def test_undersampled_peaks(self, omega):
        with pytest.raises(FitError):
            fit_sidebands(synthesize_spectrum(0.099, omega, 0.3 * KHZ, n_points=41))

    def test_missing_sideband(self, omega):
        d = np.linspace(-0.3 * omega, 0.3 * omega, 201)
        y = lorentzian(d, 0.3, 0.0, WIDTH)
        with pytest.raises(FitError):
            fit_sidebands(SidebandSpectrum(d, y, np.zeros_like(d)), omega_guess=omega)

    def test_report_is_json(self, omega):
        fit = fit_sidebands(synthesize_spectrum(0.099, omega, WIDTH, noise_seed=1))
        rep = json.loads(json.dumps(fit.report()))
        assert rep["sideband_freq_khz"] == pytest.approx(omega / KHZ, rel=1e-3)
        assert rep["widths"]["sideband_fwhm_khz"] == pytest.approx(4.0, rel=0.1)
        assert "thermal state" in rep["assumptions"]
        assert rep["amplitudes"]["red"] == pytest.approx(rep["ratio"] * rep["amplitudes"]["blue"])
