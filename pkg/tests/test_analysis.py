"""Outage bounds, asymptotic constants, and capacity inversion."""

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zfcap.analysis import (
    REGIME_HIGH_L,
    REGIME_LOW_L,
    AsymptoticConstants,
    BracketError,
    CapacityResult,
    OutageBounds,
    asymptotic_constants,
    asymptotic_outage_bounds,
    capacity_sensitivity,
    moment_w_neg,
    outage_bounds,
    outage_lower,
    outage_upper,
    outage_upper_quadrature,
    solve_capacity,
)
from zfcap.model import NetworkParams, derive_constants, sample_g, sample_w
from zfcap.special import (
    QuadratureSpec,
    integrate_semi_infinite,
    upper_gamma_general,
)

BASE = NetworkParams(lam=0.01, d=1.0, alpha=4.0, theta=1.0, beta=0.05, L=2)
CONSTS = derive_constants(BASE)
ORACLE_SPEC = QuadratureSpec(1e-12, 1e-300, 400)


class TestOutageLower:
    def test_vanishes_at_zero_density(self):
        p = replace(BASE, lam=1e-15)
        assert outage_lower(p, CONSTS) <= 1e-12
        assert outage_lower(replace(BASE, lam=0.0), CONSTS) == 0.0

    def test_saturates(self):
        p = replace(BASE, lam=1e9)
        assert outage_lower(p, CONSTS) >= 1.0 - 1e-9

    def test_monte_carlo_oracle(self):
        # Pr(W / G <= theta d^alpha) estimated from the exact samplers
        rng = np.random.default_rng(20240517)
        n = 10**7
        w = sample_w(rng, BASE, size=n)
        g = sample_g(rng, BASE, CONSTS, size=n)
        hits = np.count_nonzero(w / g <= BASE.theta * BASE.d**BASE.alpha)
        p_mc = hits / n
        se = math.sqrt(p_mc * (1 - p_mc) / n)
        assert outage_lower(BASE, CONSTS) == pytest.approx(p_mc, abs=3 * se)

    @given(st.floats(1e-4, 0.3), st.floats(1.1, 3.0))
    @settings(max_examples=25, deadline=None)
    def test_increasing_in_density_and_threshold(self, lam, factor):
        p1 = replace(BASE, lam=lam)
        p2 = replace(BASE, lam=lam * factor)
        assert outage_lower(p2, CONSTS) > outage_lower(p1, CONSTS)
        p3 = replace(BASE, lam=lam, theta=BASE.theta * factor)
        c3 = derive_constants(p3)
        assert outage_lower(p3, c3) > outage_lower(p1, CONSTS)


class TestOutageUpper:
    def test_vanishes_at_zero_density(self):
        rng = np.random.default_rng(0)
        value, stderr = outage_upper(replace(BASE, lam=0.0), CONSTS, 10**4, rng)
        assert value == 0.0 and stderr == 0.0
        value, _ = outage_upper(replace(BASE, lam=1e-12), CONSTS, 10**5, rng)
        assert value < 1e-6

    def test_saturates_at_huge_threshold(self):
        p = replace(BASE, theta=1e15)
        c = derive_constants(p)
        value, _ = outage_upper(p, c, 10**4, np.random.default_rng(1))
        assert value == 1.0

    def test_sample_count_validated(self):
        with pytest.raises(ValueError):
            outage_upper(BASE, CONSTS, 9_999, np.random.default_rng(0))

    def test_quadrature_oracle(self):
        p = replace(BASE, lam=0.005)
        value, stderr = outage_upper(p, CONSTS, 10**6, np.random.default_rng(3))
        reference = outage_upper_quadrature(p, CONSTS)
        assert value == pytest.approx(reference, abs=3 * stderr)

    @pytest.mark.parametrize("lam", [1e-3, 0.01, 0.05, 0.2])
    def test_sandwich(self, lam):
        p = replace(BASE, lam=lam)
        lower = outage_lower(p, CONSTS)
        upper, stderr = outage_upper(p, CONSTS, 10**5, np.random.default_rng(7))
        assert upper >= lower - 3 * stderr

    def test_bounds_bundle(self):
        b = outage_bounds(BASE, CONSTS, mc_samples=10**5, seed=5)
        assert 0.0 <= b.lower <= b.upper <= 1.0
        assert b.method_detail["mc_samples"] == 10**5
        with pytest.raises(ValueError):
            OutageBounds(lower=0.5, upper=0.4)


class TestMomentWNeg:
    def test_complete_gamma_limit(self):
        # beta = 0 and delta L < 1: E[B^-q] = Gamma(1 - q) at d = theta = 1
        p = NetworkParams(lam=0.01, d=1.0, alpha=4.0, theta=1.0, beta=0.0, L=1)
        c = derive_constants(p)
        q = c.delta * p.L
        assert moment_w_neg(p, c, q) == pytest.approx(math.gamma(1 - q), rel=1e-12)

    def test_order_delta_l_against_quadrature(self):
        # E[B^-1] = Gamma(0, 0.05) / p_t at these parameters
        q = CONSTS.delta * BASE.L
        closed = moment_w_neg(BASE, CONSTS, q)
        floor = BASE.w_floor
        direct = integrate_semi_infinite(
            lambda w: w**-q * math.exp(-w) / CONSTS.p_t, floor, ORACLE_SPEC
        )
        assert closed == pytest.approx(direct, rel=1e-8)
        assert closed == pytest.approx(
            upper_gamma_general(0.0, 0.05) / CONSTS.p_t, rel=1e-12
        )

    def test_order_two_against_quadrature(self):
        closed = moment_w_neg(BASE, CONSTS, 2.0)
        direct = integrate_semi_infinite(
            lambda w: w**-2.0 * math.exp(-w) / CONSTS.p_t, BASE.w_floor, ORACLE_SPEC
        )
        assert closed == pytest.approx(direct, rel=1e-8)

    def test_divergence_at_zero_beta(self):
        p = NetworkParams(lam=0.01, beta=0.0, alpha=4.0, L=2)
        c = derive_constants(p)
        with pytest.raises(ValueError):
            moment_w_neg(p, c, 1.0)


class TestAsymptoticConstants:
    def test_kappa2_closed_form(self):
        k = asymptotic_constants(BASE, CONSTS)
        assert k.kappa2 == pytest.approx(2.0 - 2.0**-0.5, rel=1e-12)

    def test_kappa1_compositional(self):
        # kappa1 = c1^L E[B^-dL] / (L)! via the moment helper
        k = asymptotic_constants(BASE, CONSTS)
        composed = (
            CONSTS.c1**BASE.L
            * moment_w_neg(BASE, CONSTS, CONSTS.delta * BASE.L)
            / math.gamma(BASE.L + 1)
        )
        assert k.kappa1 == pytest.approx(composed, rel=1e-9)

    def test_regime_flags(self):
        k1 = asymptotic_constants(
            NetworkParams(lam=0.01, alpha=4.0, beta=0.05, L=4),
            derive_constants(NetworkParams(lam=0.01, alpha=4.0, beta=0.05, L=4)),
        )
        assert k1.regime == REGIME_LOW_L and k1.kappa3 is None
        p = NetworkParams(lam=0.01, alpha=3.0, beta=0.05, L=4)
        k2 = asymptotic_constants(p, derive_constants(p))
        assert k2.regime == REGIME_HIGH_L and k2.kappa3 is not None and k2.kappa3 > 0

    def test_requires_positive_beta_in_heavy_regimes(self):
        p = NetworkParams(lam=0.01, alpha=4.0, beta=0.0, L=2)  # delta L = 1
        with pytest.raises(ValueError):
            asymptotic_constants(p, derive_constants(p))
        p = NetworkParams(lam=0.01, alpha=3.0, beta=0.0, L=4)  # L > alpha
        with pytest.raises(ValueError):
            asymptotic_constants(p, derive_constants(p))

    def test_light_regime_allows_zero_beta(self):
        p = NetworkParams(lam=0.01, alpha=4.0, beta=0.0, L=1)  # delta L = 0.5
        k = asymptotic_constants(p, derive_constants(p))
        assert k.kappa1 > 0

    def test_invariant_enforced(self):
        with pytest.raises(ValueError):
            AsymptoticConstants(kappa1=1.0, kappa2=1.0, kappa3=None, regime=REGIME_HIGH_L)


class TestAsymptoticOutageBounds:
    def test_power_law_scaling(self):
        k = asymptotic_constants(BASE, CONSTS)
        lo1, hi1 = asymptotic_outage_bounds(BASE, CONSTS, k, 1e-3)
        lo2, hi2 = asymptotic_outage_bounds(BASE, CONSTS, k, 5e-4)
        assert lo2 / lo1 == pytest.approx(2.0**-BASE.L, rel=1e-12)
        assert hi2 / hi1 == pytest.approx(2.0**-BASE.L, rel=1e-12)

    def test_ratio_is_one_plus_kappa2(self):
        k = asymptotic_constants(BASE, CONSTS)
        for lam in (1e-4, 1e-3, 1e-2):
            lo, hi = asymptotic_outage_bounds(BASE, CONSTS, k, lam)
            assert hi / lo == pytest.approx(1.0 + k.kappa2, rel=1e-12)

    def test_matches_lower_bound_asymptotically(self):
        k = asymptotic_constants(BASE, CONSTS)
        lam = (1e-4 / k.kappa1) ** (1.0 / BASE.L)
        predicted = k.kappa1 * lam**BASE.L
        actual = outage_lower(replace(BASE, lam=lam), CONSTS)
        assert actual == pytest.approx(predicted, rel=0.05)

    def test_clamped(self):
        k = asymptotic_constants(BASE, CONSTS)
        lo, hi = asymptotic_outage_bounds(BASE, CONSTS, k, 10.0)
        assert lo == 1.0 and hi == 1.0


class TestSolveCapacity:
    def test_analytic_power_law(self):
        curve = lambda lam: min(10.0 * lam**2, 1.0)
        result = solve_capacity(0.1, curve, bracket_hint=1.0)
        assert result.lambda_eps == pytest.approx(0.1, rel=1e-6)
        assert result.capacity == pytest.approx(0.09, rel=1e-6)
        assert result.capacity == (1 - result.epsilon) * result.lambda_eps

    def test_lower_curve_gives_larger_capacity(self):
        lower_curve = lambda lam: outage_lower(replace(BASE, lam=lam), CONSTS)

        def upper_curve(lam):
            rng = np.random.default_rng(11)
            return outage_upper(replace(BASE, lam=lam), CONSTS, 10**5, rng)[0]

        eps = 1e-2
        c_from_lower = solve_capacity(eps, lower_curve, 0.01)
        c_from_upper = solve_capacity(eps, upper_curve, 0.01, method="upper_bound")
        assert c_from_lower.capacity >= c_from_upper.capacity

    def test_asymptotic_prediction(self):
        k = asymptotic_constants(BASE, CONSTS)
        eps = 1e-3
        curve = lambda lam: outage_lower(replace(BASE, lam=lam), CONSTS)
        result = solve_capacity(eps, curve, 0.01)
        assert result.lambda_eps == pytest.approx(
            (eps / k.kappa1) ** (1.0 / BASE.L), rel=0.10
        )

    def test_bracket_failure(self):
        with pytest.raises(BracketError):
            solve_capacity(0.5, lambda lam: 1e-9, 1.0, max_expansions=20)

    def test_validates_epsilon(self):
        with pytest.raises(ValueError):
            solve_capacity(0.0, lambda lam: lam, 1.0)


class TestCapacitySensitivity:
    def test_exact_power_law(self):
        eps = np.geomspace(1e-5, 1e-1, 5)
        curve = [(e, 3.0 * e**0.25) for e in eps]
        assert capacity_sensitivity(curve) == pytest.approx(0.25, abs=1e-12)

    def test_flat_curve(self):
        curve = [(e, 2.0) for e in np.geomspace(1e-4, 1e-2, 4)]
        assert capacity_sensitivity(curve) == pytest.approx(0.0, abs=1e-12)

    def test_slope_near_inverse_l_on_lower_bound(self):
        curve = []
        for eps in np.geomspace(1e-5, 1e-2, 7):
            res = solve_capacity(
                float(eps),
                lambda lam: outage_lower(replace(BASE, lam=lam), CONSTS),
                0.01,
            )
            curve.append((float(eps), res.capacity))
        slope = capacity_sensitivity(curve)
        assert slope == pytest.approx(0.5, abs=0.05)

    def test_degenerate_input(self):
        with pytest.raises(ValueError):
            capacity_sensitivity([(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)])
        with pytest.raises(ValueError):
            capacity_sensitivity([(0.1, 1.0), (0.2, 2.0)])


class TestScaleInvariance:
    @pytest.mark.parametrize("s", [2.0, 0.5])
    def test_lower_bound_invariant(self, s):
        scaled = NetworkParams(
            lam=BASE.lam / s**2,
            d=BASE.d * s,
            alpha=BASE.alpha,
            theta=BASE.theta,
            beta=BASE.beta * s**-BASE.alpha,
            L=BASE.L,
        )
        c_scaled = derive_constants(scaled)
        assert outage_lower(scaled, c_scaled) == pytest.approx(
            outage_lower(BASE, CONSTS), abs=1e-9
        )

    def test_kappa_dimensionless_products(self):
        s = 2.0
        scaled = NetworkParams(
            lam=BASE.lam / s**2, d=BASE.d * s, alpha=BASE.alpha,
            theta=BASE.theta, beta=BASE.beta * s**-BASE.alpha, L=BASE.L,
        )
        kb = asymptotic_constants(BASE, CONSTS)
        ks = asymptotic_constants(scaled, derive_constants(scaled))
        # kappa1 lam^L is the outage scale: invariant under d-rescaling
        assert ks.kappa1 * scaled.lam**scaled.L == pytest.approx(
            kb.kappa1 * BASE.lam**BASE.L, rel=1e-9
        )
        assert ks.kappa2 == pytest.approx(kb.kappa2, rel=1e-12)
