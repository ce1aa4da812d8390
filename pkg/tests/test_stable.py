"""One-sided stable law: closed-form oracle at beta = 1/2, sampler laws, and
internal consistency of the density/survival evaluations.

The beta = 1/2 case is the Levy distribution with scale 1/2, whose density
and survival have elementary closed forms; it pins the numerics end to end.
"""

import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import erf

from archcredit import NumericalError, PositiveStableLaw, RngStream


def levy_pdf(x):
    return 1.0 / (2.0 * math.sqrt(math.pi)) * x**-1.5 * math.exp(-1.0 / (4.0 * x))


def levy_sf(x):
    return erf(1.0 / (2.0 * math.sqrt(x)))


@pytest.fixture(scope="module")
def half():
    return PositiveStableLaw(0.5)


class TestValidation:
    @pytest.mark.parametrize("beta", [0.0, 1.0, -0.2, 1.7])
    def test_index_outside_unit_interval(self, beta):
        with pytest.raises(ValueError):
            PositiveStableLaw(beta)

    def test_nonpositive_x(self, half):
        with pytest.raises(ValueError):
            half.pdf(0.0)
        with pytest.raises(ValueError):
            half.sf(-1.0)


class TestClosedFormOracle:
    def test_pdf_at_one(self, half):
        assert half.pdf(1.0) == pytest.approx(0.2196956447338612, abs=1e-12)

    def test_sf_examples(self, half):
        assert half.sf(1.0) == pytest.approx(0.5204998778130465, abs=1e-12)
        assert half.sf(25.0) == pytest.approx(0.1124629160182849, abs=1e-12)

    def test_log_grid(self, half):
        xs = np.logspace(-2, 4, 49)
        pdf = half.pdf(xs)
        sf = half.sf(xs)
        assert np.max(np.abs(pdf - [levy_pdf(x) for x in xs])) <= 1e-8
        assert np.max(np.abs(sf - [levy_sf(x) for x in xs])) <= 1e-8

    def test_pdf_vanishes_at_origin(self, half):
        assert half.pdf(1e-4) <= 1e-10
        assert half.pdf(1e-3) == pytest.approx(levy_pdf(1e-3), abs=1e-10)


class TestShapeInvariants:
    @pytest.mark.parametrize("beta", [0.2, 1 / 3, 0.5, 2 / 3, 0.8, 1 / 1.1])
    def test_sf_monotone_and_bounded(self, beta):
        law = PositiveStableLaw(beta)
        xs = np.logspace(-3, 6, 40)
        sf = law.sf(xs)
        assert np.all(sf >= 0.0) and np.all(sf <= 1.0)
        assert np.all(np.diff(sf) <= 1e-12)

    @pytest.mark.parametrize("beta", [0.3, 0.5, 2 / 3, 1 / 1.1])
    def test_pdf_matches_sf_derivative(self, beta):
        law = PositiveStableLaw(beta)
        for x in np.logspace(-1, 3, 9):
            p = law.pdf(x)
            if p <= 1e-8:
                continue
            h = 1e-4 * x
            deriv = -(law.sf(x + h) - law.sf(x - h)) / (2.0 * h)
            assert deriv == pytest.approx(p, rel=1e-5)

    @pytest.mark.parametrize("beta", [0.3, 0.5, 0.8])
    def test_tail_series_self_consistency(self, beta):
        # far enough out, the density is the leading power-law term; the
        # first non-vanishing correction term gauges "far enough"
        law = PositiveStableLaw(beta)
        from scipy.special import gamma

        def term(k, x):
            return (
                gamma(k * beta + 1.0)
                / math.factorial(k)
                * abs(math.sin(k * math.pi * beta))
                / math.pi
                * x ** (-k * beta - 1.0)
            )

        k2 = 2 if abs(math.sin(2 * math.pi * beta)) > 1e-12 else 3
        x = 10.0
        while term(k2, x) > 0.005 * term(1, x):
            x *= 2.0
        assert law.pdf(x) == pytest.approx(term(1, x), rel=0.01)


class TestSampler:
    def test_laplace_transform_identity(self):
        # E exp(-sV) = exp(-s**beta), checked by sample averaging
        rng = RngStream(2024)
        n = 200_000
        for beta in (0.3, 0.5, 0.8):
            v = PositiveStableLaw(beta).sample(rng, size=n)
            assert np.all(v > 0.0)
            for s in (0.25, 1.0, 4.0):
                e = np.exp(-s * v)
                z = (e.mean() - math.exp(-(s**beta))) / (e.std(ddof=1) / math.sqrt(n))
                assert abs(z) <= 4.0, f"beta={beta}, s={s}, z={z}"

    def test_laplace_at_zero_is_exact(self):
        v = PositiveStableLaw(0.5).sample(RngStream(5), size=1000)
        assert np.exp(-0.0 * v).mean() == 1.0

    def test_empirical_cdf_at_one(self, half):
        n = 200_000
        v = half.sample(RngStream(99), size=n)
        p = float((v <= 1.0).mean())
        ref = 1.0 - erf(0.5)
        se = math.sqrt(ref * (1.0 - ref) / n)
        assert abs(p - ref) <= 3.0 * se

    def test_scalar_sampling_matches_distribution(self, half):
        rng = RngStream(3)
        vals = np.array([half.sample(rng) for _ in range(20_000)])
        p = float((vals <= 1.0).mean())
        ref = 1.0 - erf(0.5)
        assert abs(p - ref) <= 4.0 * math.sqrt(ref * (1 - ref) / vals.size)


class TestQuantilesAgainstSamples:
    @pytest.mark.parametrize("beta", [0.5, 2 / 3])
    def test_dkw_band_at_deciles(self, beta):
        law = PositiveStableLaw(beta)
        n = 1_000_000
        v = np.sort(law.sample(RngStream(31), size=n))
        eps = math.sqrt(math.log(2.0 / 0.01) / (2.0 * n))  # 99% DKW band
        for q in np.arange(0.1, 0.95, 0.1):
            hi = 1.0
            while law.sf(hi) > 1.0 - q:
                hi *= 4.0
            xq = brentq(lambda x: law.sf(x) - (1.0 - q), 1e-9, hi, xtol=1e-12)
            emp = np.searchsorted(v, xq, side="right") / n
            assert abs(emp - q) <= eps, f"beta={beta}, q={q}"
