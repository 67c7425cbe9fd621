import math

import numpy as np
import pytest
import scipy.integrate
import scipy.special
import scipy.stats

from sardespeckle import speckle_stats as ss
from sardespeckle.errors import InputError
from sardespeckle.image_core import Domain, RasterImage

EULER_GAMMA = 0.5772156649015329


class TestSpecialFunctions:
    def test_digamma_known_constants(self):
        assert ss.digamma(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-12)
        assert ss.digamma(2.0) == pytest.approx(1.0 - EULER_GAMMA, abs=1e-12)
        assert ss.digamma(0.5) == pytest.approx(-EULER_GAMMA - 2.0 * math.log(2.0),
                                                abs=1e-12)

    def test_digamma_vs_lgamma_derivative(self):
        # independent oracle: central difference of math.lgamma with
        # Richardson extrapolation
        for x in (0.7, 1.0, 2.5, 8.0, 16.0, 123.4):
            h = 1e-4 * max(1.0, x)
            d1 = (math.lgamma(x + h) - math.lgamma(x - h)) / (2 * h)
            d2 = (math.lgamma(x + h / 2) - math.lgamma(x - h / 2)) / h
            oracle = (4 * d2 - d1) / 3
            assert ss.digamma(x) == pytest.approx(oracle, abs=1e-8)

    @pytest.mark.parametrize("x", [0.5, 1.0, 1.7, 2.0, 4.0, 8.0, 9.999,
                                   10.0, 16.0, 100.0, 1e4, 1e6])
    def test_digamma_vs_scipy(self, x):
        assert ss.digamma(x) == pytest.approx(scipy.special.digamma(x),
                                              rel=0, abs=1e-12)

    def test_trigamma_known_constants(self):
        assert ss.polygamma1(1.0) == pytest.approx(math.pi ** 2 / 6.0, abs=1e-12)
        assert ss.polygamma1(0.5) == pytest.approx(math.pi ** 2 / 2.0, abs=1e-12)

    def test_trigamma_recurrence(self):
        # psi1(x+1) = psi1(x) - 1/x^2
        for x in (0.6, 1.0, 3.3, 9.5, 50.0):
            assert ss.polygamma1(x + 1.0) == pytest.approx(
                ss.polygamma1(x) - 1.0 / (x * x), abs=1e-12)

    @pytest.mark.parametrize("x", [0.5, 1.0, 2.0, 4.0, 8.0, 9.999, 10.0,
                                   16.0, 100.0, 1e4])
    def test_trigamma_vs_scipy(self, x):
        assert ss.polygamma1(x) == pytest.approx(
            float(scipy.special.polygamma(1, x)), rel=0, abs=1e-10)

    def test_domain_errors(self):
        with pytest.raises(InputError):
            ss.digamma(0.0)
        with pytest.raises(InputError):
            ss.digamma(-1.0)
        with pytest.raises(InputError):
            ss.polygamma1(0.0)
        with pytest.raises(InputError):
            ss.log_gamma(-2.0)

    def test_log_gamma(self):
        assert ss.log_gamma(1.0) == 0.0
        assert ss.log_gamma(5.0) == pytest.approx(math.log(24.0), abs=1e-12)


class TestDensities:
    def test_gamma_pdf_values(self):
        # L=1: exp(-n); L=2: 4 n exp(-2n)
        assert ss.gamma_speckle_pdf(1.0, 1.0) == pytest.approx(math.exp(-1.0))
        assert ss.gamma_speckle_pdf(0.5, 2.0) == pytest.approx(
            4.0 * 0.5 * math.exp(-1.0))

    def test_ft_pdf_values(self):
        # L=1 at n_log=0: exp(-1); the mode is always at 0
        assert ss.ft_speckle_pdf(0.0, 1.0) == pytest.approx(math.exp(-1.0))
        for L in (1.0, 2.0, 7.0):
            eps = 1e-4
            p0 = ss.ft_speckle_pdf(0.0, L)
            assert p0 > ss.ft_speckle_pdf(eps, L)
            assert p0 > ss.ft_speckle_pdf(-eps, L)

    @pytest.mark.parametrize("L", [1.0, 2.0, 4.0, 8.0, 16.0])
    def test_change_of_variables(self, L):
        # f_log(t) = f_gamma(e^t) * e^t
        for t in np.linspace(-4.0, 2.0, 25):
            lhs = ss.ft_speckle_pdf(t, L)
            rhs = ss.gamma_speckle_pdf(math.exp(t), L) * math.exp(t)
            assert lhs == pytest.approx(rhs, rel=1e-12)

    @pytest.mark.parametrize("L", [1.0, 2.0, 4.0, 8.0, 16.0])
    def test_ft_moments_by_quadrature(self, L):
        mean, _ = scipy.integrate.quad(lambda t: t * ss.ft_speckle_pdf(t, L),
                                       -40.0, 10.0, limit=200)
        assert mean == pytest.approx(ss.digamma(L) - math.log(L), abs=1e-6)
        var, _ = scipy.integrate.quad(
            lambda t: (t - mean) ** 2 * ss.ft_speckle_pdf(t, L),
            -40.0, 10.0, limit=200)
        assert var == pytest.approx(ss.polygamma1(L), abs=1e-6)

    def test_pdf_domain_errors(self):
        with pytest.raises(InputError):
            ss.gamma_speckle_pdf(0.0, 1.0)
        with pytest.raises(InputError):
            ss.gamma_speckle_pdf(1.0, 0.5)
        with pytest.raises(InputError):
            ss.ft_speckle_pdf(0.0, 0.5)


class TestSpeckleModel:
    def test_from_looks(self):
        m = ss.SpeckleModel.from_looks(1.0)
        assert m.log_mean == pytest.approx(-EULER_GAMMA, abs=1e-12)
        assert m.log_var == pytest.approx(math.pi ** 2 / 6.0, abs=1e-12)

    def test_moments_shrink_with_looks(self):
        models = [ss.SpeckleModel.from_looks(L) for L in (1, 2, 4, 8, 16, 64)]
        for a, b in zip(models, models[1:]):
            assert b.log_mean > a.log_mean  # bias decreases in magnitude
            assert b.log_mean < 0.0
            assert b.log_var < a.log_var

    def test_bad_looks(self):
        with pytest.raises(InputError):
            ss.SpeckleModel.from_looks(0.5)


class TestSimulation:
    def test_determinism(self):
        a = ss.speckle_field((64, 64), 1.0, seed=42)
        b = ss.speckle_field((64, 64), 1.0, seed=42)
        c = ss.speckle_field((64, 64), 1.0, seed=43)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_ks_against_closed_form_cdf(self):
        # for L=1 the log-speckle CDF is F(t) = 1 - exp(-e^t)
        samples = np.log(ss.speckle_field((1000, 1000), 1.0, seed=7).ravel())
        stat = scipy.stats.kstest(samples,
                                  lambda t: 1.0 - np.exp(-np.exp(t))).statistic
        assert stat < 0.002

    @pytest.mark.parametrize("L", [2.0, 8.0])
    def test_ks_against_scipy_gamma(self, L):
        samples = ss.speckle_field((500, 500), L, seed=11).ravel()
        stat = scipy.stats.kstest(samples, "gamma", args=(L, 0.0, 1.0 / L)).statistic
        assert stat < 0.004

    def test_simulate_speckle_moments(self):
        img = RasterImage(np.full((500, 500), 100.0, dtype=np.float32))
        noisy = ss.simulate_speckle(img, 4.0, seed=3)
        vals = noisy.samples.astype(np.float64)
        assert vals.mean() == pytest.approx(100.0, rel=0.01)
        assert vals.var() == pytest.approx(100.0 ** 2 / 4.0, rel=0.05)

    def test_simulate_rejects_nonpositive(self):
        img = RasterImage(np.zeros((8, 8), dtype=np.float32))
        with pytest.raises(InputError):
            ss.simulate_speckle(img, 1.0, seed=0)

    def test_simulate_requires_intensity(self):
        img = RasterImage(np.ones((8, 8), dtype=np.float32), Domain.AMPLITUDE)
        with pytest.raises(InputError):
            ss.simulate_speckle(img, 1.0, seed=0)

    def test_bad_looks(self):
        with pytest.raises(InputError):
            ss.speckle_field((4, 4), 0.9, seed=0)
