"""Parameter validation, derived constants, and the interference laws."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from zfcap.model import (
    NetworkParams,
    PrimaryInterferenceDist,
    cdf_primary,
    derive_constants,
    marked_density_mu,
    pdf_primary,
    sample_g,
    sample_w,
    secondary_moments,
)
from zfcap.special import reg_lower_gamma

C1_ALPHA4 = math.pi * math.gamma(1.5)  # 2.7841639984158535


@pytest.fixture
def params():
    return NetworkParams(lam=0.01, d=1.0, alpha=4.0, theta=1.0, beta=0.05, L=2)


@pytest.fixture
def consts(params):
    return derive_constants(params)


st_alpha = st.floats(2.05, 8.0)
st_lam = st.floats(1e-6, 1.0)


class TestNetworkParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(lam=-0.1),
            dict(lam=0.1, d=0.0),
            dict(lam=0.1, alpha=2.0),
            dict(lam=0.1, theta=0.0),
            dict(lam=0.1, beta=-1e-9),
            dict(lam=0.1, L=0),
            dict(lam=0.1, L=1.5),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            NetworkParams(**kwargs)

    def test_zero_density_allowed(self):
        NetworkParams(lam=0.0)

    def test_w_floor(self):
        p = NetworkParams(lam=0.1, d=2.0, alpha=3.0, beta=0.25)
        assert p.w_floor == pytest.approx(0.25 * 8.0)


class TestDerivedConstants:
    def test_delta(self):
        c = derive_constants(NetworkParams(lam=0.1, alpha=4.0))
        assert c.delta == 0.5

    def test_pt_at_zero_beta(self):
        c = derive_constants(NetworkParams(lam=0.1, beta=0.0))
        assert c.p_t == 1.0

    def test_c1_alpha4(self):
        c = derive_constants(NetworkParams(lam=0.1, alpha=4.0))
        assert c.c1 == pytest.approx(2.7841639984158535, rel=1e-10)

    @given(
        st_alpha,
        st.floats(0.1, 4.0),
        st.floats(0.1, 10.0),
        st.floats(0.0, 1.0),
    )
    def test_cross_ratios(self, alpha, d, theta, beta):
        p = NetworkParams(lam=0.1, d=d, alpha=alpha, theta=theta, beta=beta)
        c = derive_constants(p)
        assert c.c3 / c.c1 == pytest.approx(2.0 / (alpha - 2.0), rel=1e-12)
        assert c.c4 / c.c1 == pytest.approx(1.0 / (alpha - 1.0), rel=1e-12)
        assert c.delta == pytest.approx(2.0 / alpha, rel=1e-15)
        assert c.p_t == pytest.approx(math.exp(-beta * d**alpha), rel=1e-12)


class TestSampleW:
    def test_unit_exponential_when_beta_zero(self):
        rng = np.random.default_rng(0)
        p = NetworkParams(lam=0.1, beta=0.0)
        draws = sample_w(rng, p, size=10**6)
        assert abs(draws.mean() - 1.0) < 0.01

    def test_support_floor(self):
        rng = np.random.default_rng(1)
        p = NetworkParams(lam=0.1, d=1.0, alpha=4.0, beta=0.3)
        draws = sample_w(rng, p, size=10**6)
        assert draws.min() >= p.w_floor

    def test_shifted_mean(self):
        rng = np.random.default_rng(2)
        p = NetworkParams(lam=0.1, d=1.0, alpha=4.0, beta=0.1)
        draws = sample_w(rng, p, size=10**6)
        assert abs(draws.mean() - 1.1) < 0.01


class TestSampleG:
    def test_fixed_point(self, params, consts):
        # if the Gamma draw equals c1*lam the transform returns exactly 1

        class FixedRng:
            def gamma(self, shape, size=None):
                return consts.c1 * params.lam

        assert sample_g(FixedRng(), params, consts) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("L", [1, 2])
    def test_ks_against_cdf(self, L):
        p = NetworkParams(lam=0.01, d=1.0, alpha=4.0, theta=1.0, beta=0.05, L=L)
        c = derive_constants(p)
        rng = np.random.default_rng(42)
        draws = sample_g(rng, p, c, size=10**5)
        result = stats.kstest(draws, lambda g: cdf_primary(g, p, c))
        assert result.statistic < 0.01

    def test_l1_closed_form(self):
        # Pr(G <= g) = exp(-c1 lam g^-1/2) at L = 1, alpha = 4
        p = NetworkParams(lam=0.02, alpha=4.0, L=1)
        c = derive_constants(p)
        rng = np.random.default_rng(7)
        draws = sample_g(rng, p, c, size=10**5)
        closed = lambda g: np.exp(-c.c1 * p.lam * np.asarray(g) ** -0.5)
        assert stats.kstest(draws, closed).statistic < 0.01


class TestCdfPrimary:
    def test_limits(self, params, consts):
        assert cdf_primary(1e12, params, consts) == pytest.approx(1.0, abs=1e-9)
        assert cdf_primary(1e-12, params, consts) == pytest.approx(0.0, abs=1e-12)

    def test_poisson_sum_value(self):
        # at x = c1 lam g^-delta = 1 and L = 2 the CDF is 2/e
        p = NetworkParams(lam=0.03, alpha=4.0, L=2)
        c = derive_constants(p)
        g = (c.c1 * p.lam) ** (1.0 / c.delta)
        assert cdf_primary(g, p, c) == pytest.approx(2.0 / math.e, rel=1e-12)

    def test_domain(self, params, consts):
        with pytest.raises(ValueError):
            cdf_primary(0.0, params, consts)

    @given(st.floats(1e-4, 1e4), st.floats(1e-4, 1e4))
    def test_nondecreasing(self, g1, g2):
        p = NetworkParams(lam=0.05, alpha=3.0, L=3)
        c = derive_constants(p)
        lo, hi = sorted((g1, g2))
        assert cdf_primary(lo, p, c) <= cdf_primary(hi, p, c) + 1e-15

    @given(st_lam, st_alpha, st.integers(1, 6), st.floats(1e-3, 1e3))
    @settings(max_examples=150)
    def test_identity_with_reg_lower(self, lam, alpha, L, g):
        p = NetworkParams(lam=lam, alpha=alpha, L=L)
        c = derive_constants(p)
        x = c.c1 * lam * g**-c.delta
        assert cdf_primary(g, p, c) == pytest.approx(
            1.0 - reg_lower_gamma(L, x), abs=1e-12
        )

    @given(st.floats(0.5, 2.0), st.floats(1e-2, 1e2))
    @settings(max_examples=100)
    def test_scale_invariance(self, s, g):
        base = NetworkParams(lam=0.05, d=1.0, alpha=3.5, theta=2.0, beta=0.1, L=2)
        scaled = NetworkParams(
            lam=0.05 / s**2, d=s, alpha=3.5, theta=2.0, beta=0.1 * s**-3.5, L=2
        )
        cb = derive_constants(base)
        cs = derive_constants(scaled)
        assert cdf_primary(g * s**-3.5, scaled, cs) == pytest.approx(
            cdf_primary(g, base, cb), abs=1e-10
        )


class TestPdfPrimary:
    def test_normalization(self, params, consts):
        total, err = integrate.quad(
            lambda g: pdf_primary(g, params, consts), 0.0, np.inf, limit=200
        )
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_matches_cdf_derivative(self, params, consts):
        for g in (0.001, 0.01, 0.1):
            h = g * 1e-6
            numeric = (
                cdf_primary(g + h, params, consts) - cdf_primary(g - h, params, consts)
            ) / (2 * h)
            assert pdf_primary(g, params, consts) == pytest.approx(numeric, rel=1e-6)

    def test_direct_value(self):
        # L=1, alpha=4, c1 lam = 1: f(1) = e^-1 / 2
        p = NetworkParams(lam=1.0 / C1_ALPHA4, alpha=4.0, L=1)
        c = derive_constants(p)
        assert pdf_primary(1.0, p, c) == pytest.approx(0.5 * math.exp(-1.0), rel=1e-10)

    def test_vanishes_at_extremes(self, params, consts):
        assert pdf_primary(1e-9, params, consts) == pytest.approx(0.0, abs=1e-30)
        assert pdf_primary(1e9, params, consts) < 1e-12

    def test_zero_density_rejected(self):
        p = NetworkParams(lam=0.0)
        with pytest.raises(ValueError):
            pdf_primary(1.0, p, derive_constants(p))


class TestSecondaryMoments:
    def test_unit_level(self, params, consts):
        mean, var = secondary_moments(1.0, params, consts)
        assert mean == pytest.approx(consts.c3 * params.lam, rel=1e-12)
        assert var == pytest.approx(consts.c4 * params.lam, rel=1e-12)

    def test_direct_value(self):
        p = NetworkParams(lam=0.01, alpha=4.0, L=2)
        c = derive_constants(p)
        mean, _ = secondary_moments(4.0, p, c)
        assert mean == pytest.approx(2.0 * C1_ALPHA4 * 0.01, rel=1e-10)
        assert mean == pytest.approx(0.05568327996831707, rel=1e-9)

    def test_domain(self, params, consts):
        with pytest.raises(ValueError):
            secondary_moments(-1.0, params, consts)


class TestMarkedDensity:
    def test_unit_level(self, params, consts):
        assert marked_density_mu(1.0, params, consts) == pytest.approx(
            consts.c1 * params.lam, rel=1e-12
        )

    def test_linearity_in_density(self, consts):
        p1 = NetworkParams(lam=0.01, alpha=4.0, L=2, beta=0.05)
        p2 = NetworkParams(lam=0.02, alpha=4.0, L=2, beta=0.05)
        c1 = derive_constants(p1)
        c2 = derive_constants(p2)
        assert marked_density_mu(0.5, p2, c2) == pytest.approx(
            2.0 * marked_density_mu(0.5, p1, c1), rel=1e-12
        )

    def test_direct_value(self):
        p = NetworkParams(lam=0.1, alpha=4.0, L=2)
        c = derive_constants(p)
        assert marked_density_mu(0.25, p, c) == pytest.approx(
            C1_ALPHA4 * 0.1 * 0.25**-0.5, rel=1e-10
        )
        assert marked_density_mu(0.25, p, c) == pytest.approx(0.556832799683, rel=1e-9)


class TestPrimaryInterferenceDist:
    def test_bundle_delegates(self, params, consts):
        dist = PrimaryInterferenceDist(params, consts)
        assert dist.cdf(1.0) == cdf_primary(1.0, params, consts)
        assert dist.pdf(1.0) == pdf_primary(1.0, params, consts)
        rng = np.random.default_rng(0)
        rng2 = np.random.default_rng(0)
        assert dist.sample(rng) == sample_g(rng2, params, consts)
