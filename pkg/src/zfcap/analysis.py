"""Closed-form outage bounds, asymptotic scaling constants, and capacity.

The outage probability itself has no closed form (the aggregate
interference is a power-law shot noise), so the exact quantity is
sandwiched: a lower bound that accounts only for the primary interferer,
and an upper bound that adds a Chebyshev estimate of the aggregate's
contribution.  Small-density asymptotics of the two give power-law
envelopes for the transmission capacity C(eps) = (1 - eps) * lambda_eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .model import (
    DerivedConstants,
    NetworkParams,
    cdf_primary,
    pdf_primary,
    sample_g,
    sample_w,
    secondary_moments,
)
from .special import (
    QuadratureSpec,
    gamma_fn,
    integrate_semi_infinite,
    reg_lower_gamma,
    upper_gamma_general,
)

__all__ = [
    "OutageBounds",
    "AsymptoticConstants",
    "CapacityResult",
    "REGIME_LOW_L",
    "REGIME_HIGH_L",
    "BracketError",
    "outage_lower",
    "outage_upper",
    "outage_upper_quadrature",
    "outage_bounds",
    "moment_w_neg",
    "asymptotic_constants",
    "asymptotic_outage_bounds",
    "solve_capacity",
    "capacity_sensitivity",
]

REGIME_LOW_L = "L_le_alpha"
REGIME_HIGH_L = "L_gt_alpha"


@dataclass(frozen=True)
class OutageBounds:
    """Sandwich [lower, upper] around the exact outage probability."""

    lower: float
    upper: float
    method_detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise ValueError(
                f"require 0 <= lower <= upper <= 1, got ({self.lower}, {self.upper})"
            )


@dataclass(frozen=True)
class AsymptoticConstants:
    """Small-density scaling coefficients of the outage probability.

    Outage behaves like kappa1 * lam^L from below; from above it is
    kappa1 (1 + kappa2) lam^L when L <= alpha, and kappa3 * lam^alpha
    when L > alpha (kappa3 is None otherwise).
    """

    kappa1: float
    kappa2: float
    kappa3: float | None
    regime: str

    def __post_init__(self):
        if not self.kappa1 > 0 or not self.kappa2 > 0:
            raise ValueError("kappa1 and kappa2 must be > 0")
        if (self.kappa3 is not None) != (self.regime == REGIME_HIGH_L):
            raise ValueError("kappa3 must be present iff regime is L_gt_alpha")


@dataclass(frozen=True)
class CapacityResult:
    """Density and capacity meeting an outage target epsilon."""

    epsilon: float
    lambda_eps: float
    capacity: float
    method: str

    @classmethod
    def from_lambda(cls, epsilon: float, lambda_eps: float, method: str):
        return cls(epsilon, lambda_eps, (1.0 - epsilon) * lambda_eps, method)


class BracketError(RuntimeError):
    """The outage curve never crosses the target within the search range."""

    def __init__(self, message, lam_low, p_low, lam_high, p_high):
        super().__init__(
            f"{message}: P({lam_low:.6g})={p_low:.6g}, P({lam_high:.6g})={p_high:.6g}"
        )
        self.endpoints = ((lam_low, p_low), (lam_high, p_high))


def outage_lower(
    params: NetworkParams,
    consts: DerivedConstants,
    quad: QuadratureSpec | None = None,
) -> float:
    """Primary-interferer-only outage bound.

    Averages P(L, c2 lam W^-delta) over the conditioned link gain
    W = beta d^alpha + Exp(1); this is Pr(W/G <= theta d^alpha).
    """
    if params.lam == 0:
        return 0.0
    floor = params.w_floor
    c2lam = consts.c2 * params.lam
    L, delta = params.L, consts.delta

    def integrand(t: float) -> float:
        return math.exp(-t) * reg_lower_gamma(L, c2lam * (floor + t) ** -delta)

    value = integrate_semi_infinite(integrand, 0.0, quad)
    return min(max(value, 0.0), 1.0)


def outage_upper(
    params: NetworkParams,
    consts: DerivedConstants,
    mc_samples: int,
    rng: np.random.Generator,
    quad: QuadratureSpec | None = None,
    lower: float | None = None,
) -> tuple[float, float]:
    """Chebyshev upper bound on outage: lower + (1 - lower) * excess.

    The primary-outage part is the deterministic lower bound; the excess
    is the conditional expectation, given G < B = d^-alpha theta^-1 W, of
    min(Var_agg / (B - G - Mean_agg)^2, 1), clamped to 1 whenever
    B - G - Mean_agg <= 0 (the Chebyshev bound is vacuous there).  The
    excess is estimated by Monte Carlo over the exact (W, G) samplers, so
    the result dominates the lower bound by construction.  Returns
    (estimate, standard error).
    """
    if mc_samples < 10_000:
        raise ValueError(f"mc_samples must be >= 10000, got {mc_samples}")
    if params.lam == 0:
        return 0.0, 0.0
    if lower is None:
        lower = outage_lower(params, consts, quad)
    w = sample_w(rng, params, size=mc_samples)
    b = w / (params.theta * params.d**params.alpha)
    g = sample_g(rng, params, consts, size=mc_samples)
    below = g < b
    m = int(np.count_nonzero(below))
    if m == 0:
        # G >= B almost surely: the excess carries weight (1 - lower) ~ 0
        return 1.0, 0.0
    g, b = g[below], b[below]
    mean_agg, var_agg = secondary_moments(g, params, consts)
    slack = b - g - mean_agg
    with np.errstate(divide="ignore", over="ignore"):
        excess = np.where(slack > 0, np.minimum(var_agg / np.square(slack), 1.0), 1.0)
    p_alpha = float(excess.mean())
    se_alpha = float(excess.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.5
    estimate = min(lower + (1.0 - lower) * p_alpha, 1.0)
    return estimate, (1.0 - lower) * se_alpha


def outage_upper_quadrature(
    params: NetworkParams,
    consts: DerivedConstants,
    quad: QuadratureSpec | None = None,
) -> float:
    """Deterministic evaluation of the Chebyshev upper bound.

    Slow verification path: outer quadrature over W, inner over G against
    the primary-interference PDF, with the inner integral split at the
    points where the Chebyshev term saturates at 1.
    """
    if params.lam == 0:
        return 0.0
    inner_quad = QuadratureSpec(1e-9, 1e-12, 200) if quad is None else quad
    L, delta, lam = params.L, consts.delta, params.lam
    c1lam = consts.c1 * lam
    c3lam = consts.c3 * lam
    c4lam = consts.c4 * lam

    def inner(b: float) -> float:
        # Expectation of the per-sample upper-bound term at fixed B = b.
        prob_ge_b = 1.0 - cdf_primary(b, params, consts)

        def slack(g):
            return b - g - c3lam * g ** (1.0 - delta)

        def ratio_minus_one(g):
            s = slack(g)
            if s <= 0:
                return math.inf
            return c4lam * g ** (2.0 - delta) / (s * s) - 1.0

        lo = b * 1e-12
        g0 = optimize.brentq(slack, lo, b) if slack(b) < 0 else b
        if ratio_minus_one(lo) >= 0.0:
            g1 = lo
        elif ratio_minus_one(g0 * (1 - 1e-12)) <= 0.0:
            g1 = g0
        else:
            g1 = optimize.brentq(ratio_minus_one, lo, g0 * (1 - 1e-12))

        def cheb_density(g: float) -> float:
            s = slack(g)
            return (
                c4lam
                * g ** (2.0 - delta)
                / (s * s)
                * pdf_primary(g, params, consts)
            )

        below, _ = _quad_finite(cheb_density, 0.0, g1, inner_quad)
        saturated = cdf_primary(b, params, consts) - (
            cdf_primary(g1, params, consts) if g1 > 0 else 0.0
        )
        return prob_ge_b + below + max(saturated, 0.0)

    floor = params.w_floor
    scale = params.theta * params.d**params.alpha

    def integrand(t: float) -> float:
        return math.exp(-t) * inner((floor + t) / scale)

    value = integrate_semi_infinite(integrand, 0.0, quad)
    return min(max(value, 0.0), 1.0)


def _quad_finite(f, a, b, spec: QuadratureSpec):
    from scipy import integrate as _integrate

    if b <= a:
        return 0.0, 0.0
    value, err = _integrate.quad(
        f,
        a,
        b,
        epsabs=spec.absolute_tolerance,
        epsrel=spec.relative_tolerance,
        limit=spec.max_subdivisions,
    )
    return value, err


def outage_bounds(
    params: NetworkParams,
    consts: DerivedConstants,
    mc_samples: int = 200_000,
    rng: np.random.Generator | None = None,
    quad: QuadratureSpec | None = None,
    seed: int = 0,
) -> OutageBounds:
    """Evaluate both bounds; the upper one combines the lower bound with
    the Chebyshev excess on the non-outage-by-primary event."""
    if rng is None:
        rng = np.random.default_rng(seed)
    lower = outage_lower(params, consts, quad)
    upper, stderr = outage_upper(params, consts, mc_samples, rng, quad, lower=lower)
    return OutageBounds(
        lower=lower,
        upper=upper,
        method_detail={
            "mc_samples": mc_samples,
            "upper_stderr": stderr,
            "quad": (quad or QuadratureSpec()).__dict__.copy(),
        },
    )


def moment_w_neg(
    params: NetworkParams, consts: DerivedConstants, order: float
) -> float:
    """Negative moment E[B^-order] of B = d^-alpha theta^-1 W.

    Closed form d^(alpha q) theta^q Gamma(1 - q, beta d^alpha) / p_t;
    diverges when beta = 0 and q >= 1.
    """
    if not order > 0:
        raise ValueError(f"order must be > 0, got {order}")
    q = float(order)
    a = 1.0 - q
    x = params.w_floor
    if x == 0 and a <= 0:
        raise ValueError(
            f"E[B^-{q}] diverges for beta = 0 (incomplete-gamma argument {a} <= 0)"
        )
    scale = params.d ** (params.alpha * q) * params.theta**q
    return scale * upper_gamma_general(a, x) / consts.p_t if x > 0 else scale * gamma_fn(a)


def asymptotic_constants(
    params: NetworkParams, consts: DerivedConstants
) -> AsymptoticConstants:
    """Small-density scaling coefficients kappa1, kappa2 and, when
    L > alpha, kappa3."""
    L, alpha, delta = params.L, params.alpha, consts.delta
    x = params.w_floor
    a1 = 1.0 - delta * L
    if x == 0 and a1 <= 0:
        raise ValueError(
            "kappa1 requires beta > 0 when delta*L >= 1 (Gamma(1-delta L, 0) diverges)"
        )
    kappa1 = (
        upper_gamma_general(a1, x) * consts.c2**L / (consts.p_t * math.gamma(L + 1))
    ) if x > 0 else (gamma_fn(a1) * consts.c2**L / math.gamma(L + 1))
    kappa2 = 2.0 ** (delta * L) / L * (alpha / (alpha - 2.0) - 2.0**-delta)
    if L <= alpha:
        return AsymptoticConstants(kappa1, kappa2, None, REGIME_LOW_L)

    if x == 0:
        raise ValueError("kappa3 requires beta > 0 (Gamma(-1, 0) diverges)")
    shifted = L - alpha + 1.0
    if shifted <= 0 and shifted == int(shifted):
        raise ValueError(f"Gamma({shifted}) pole in kappa3")
    kappa3 = (
        8.0
        * (consts.c1 * params.d**2 * params.theta**delta) ** alpha
        * upper_gamma_general(-1.0, x)
        * math.gamma(shifted)
        / ((alpha - 2.0) * consts.p_t * math.gamma(L))
    )
    return AsymptoticConstants(kappa1, kappa2, kappa3, REGIME_HIGH_L)


def asymptotic_outage_bounds(
    params: NetworkParams,
    consts: DerivedConstants,
    kappas: AsymptoticConstants,
    lambda_query: float,
) -> tuple[float, float]:
    """Power-law envelope (lo, hi) of the outage probability at a given
    density, clamped to [0, 1]."""
    if not lambda_query > 0:
        raise ValueError(f"lambda_query must be > 0, got {lambda_query}")
    lo = kappas.kappa1 * lambda_query**params.L
    if kappas.regime == REGIME_LOW_L:
        hi = kappas.kappa1 * (1.0 + kappas.kappa2) * lambda_query**params.L
    else:
        hi = kappas.kappa3 * lambda_query**params.alpha
    return min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0)


def solve_capacity(
    epsilon: float,
    outage_curve: Callable[[float], float],
    bracket_hint: float,
    method: str = "lower_bound",
    rel_tol: float = 1e-6,
    max_expansions: int = 200,
    max_bisections: int = 500,
) -> CapacityResult:
    """Invert a monotone outage curve: find lambda_eps with
    P(lambda_eps) = epsilon, then C = (1 - epsilon) lambda_eps.

    Brackets the crossing by doubling/halving from bracket_hint, then
    bisects in log-density until |P - epsilon| <= rel_tol * epsilon.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if not bracket_hint > 0:
        raise ValueError(f"bracket_hint must be > 0, got {bracket_hint}")

    lam = bracket_hint
    p = outage_curve(lam)
    if abs(p - epsilon) <= rel_tol * epsilon:
        return CapacityResult.from_lambda(epsilon, lam, method)

    if p < epsilon:
        lo, p_lo = lam, p
        hi, p_hi = lam, p
        for _ in range(max_expansions):
            hi *= 2.0
            p_hi = outage_curve(hi)
            if p_hi >= epsilon:
                break
            lo, p_lo = hi, p_hi
        else:
            raise BracketError("curve stays below epsilon", lo, p_lo, hi, p_hi)
    else:
        hi, p_hi = lam, p
        lo, p_lo = lam, p
        for _ in range(max_expansions):
            lo /= 2.0
            p_lo = outage_curve(lo)
            if p_lo <= epsilon:
                break
            hi, p_hi = lo, p_lo
        else:
            raise BracketError("curve stays above epsilon", lo, p_lo, hi, p_hi)

    mid, p_mid = lo, p_lo
    for _ in range(max_bisections):
        mid = math.sqrt(lo * hi)
        p_mid = outage_curve(mid)
        if abs(p_mid - epsilon) <= rel_tol * epsilon:
            return CapacityResult.from_lambda(epsilon, mid, method)
        if p_mid < epsilon:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 4e-16:
            break
    if abs(p_mid - epsilon) <= 64 * rel_tol * epsilon:
        return CapacityResult.from_lambda(epsilon, mid, method)
    raise BracketError(
        f"bisection stalled at |P - eps| = {abs(p_mid - epsilon):.3e}",
        lo,
        outage_curve(lo),
        hi,
        outage_curve(hi),
    )


def capacity_sensitivity(curve) -> float:
    """Least-squares slope of log C against log epsilon.

    For a network obeying the capacity power law this is close to 1/L.
    """
    pts = [(float(e), float(c)) for e, c in curve]
    if len(pts) < 3:
        raise ValueError("need at least 3 (epsilon, capacity) points")
    eps = np.array([p[0] for p in pts])
    cap = np.array([p[1] for p in pts])
    if np.any(eps <= 0) or np.any(cap <= 0):
        raise ValueError("epsilon and capacity values must be positive")
    x = np.log(eps)
    if np.ptp(x) == 0:
        raise ValueError("degenerate input: all epsilon values identical")
    y = np.log(cap)
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
