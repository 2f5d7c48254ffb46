"""Network parameters, derived constants, and the effective interference laws.

After the receiver nulls the L-1 strongest interferers, the residual
interference splits into the strongest remaining term (power G, the
"primary" interferer) and the aggregate of all weaker ones.  This module
holds the closed-form law of G, the conditional mean/variance of the
aggregate, the marked-process intensity they derive from, and exact
samplers for G and for the desired-link gain W.

Densities are for ACTIVE transmitters: opportunistic activation (gain
threshold beta) is already folded into the density, so the area-scale
constant c1 carries no activation-probability factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

__all__ = [
    "NetworkParams",
    "DerivedConstants",
    "PrimaryInterferenceDist",
    "derive_constants",
    "sample_w",
    "sample_g",
    "cdf_primary",
    "pdf_primary",
    "secondary_moments",
    "marked_density_mu",
]


@dataclass(frozen=True)
class NetworkParams:
    """Physical and protocol parameters of the network.

    lam    -- density of active transmitters (nodes per unit area, >= 0)
    d      -- transmitter-receiver link distance (> 0)
    alpha  -- path-loss exponent (> 2, else interference moments diverge)
    theta  -- SIR decoding threshold, linear scale (> 0)
    beta   -- opportunistic activation threshold on the link gain (>= 0)
    L      -- antennas per node (integer >= 1); L-1 interferers are nulled
    """

    lam: float
    d: float = 1.0
    alpha: float = 4.0
    theta: float = 1.0
    beta: float = 0.0
    L: int = 1

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not self.d > 0:
            raise ValueError(f"d must be > 0, got {self.d}")
        if not self.alpha > 2:
            raise ValueError(f"alpha must be > 2, got {self.alpha}")
        if not self.theta > 0:
            raise ValueError(f"theta must be > 0, got {self.theta}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be an integer >= 1, got {self.L}")

    @property
    def w_floor(self) -> float:
        """Lower edge of the support of the conditioned link gain W."""
        return self.beta * self.d**self.alpha


@dataclass(frozen=True)
class DerivedConstants:
    """Constants computed once per parameter set.

    delta = 2/alpha, p_t = exp(-beta d^alpha) is the activation
    probability, c1 = pi Gamma(1+delta) scales the marked-process
    intensity, c2 = pi Gamma(1+delta) theta^delta d^2 enters the outage
    lower bound, and c3, c4 scale the aggregate-interference mean and
    variance respectively.
    """

    delta: float
    p_t: float
    c1: float
    c2: float
    c3: float
    c4: float


def derive_constants(params: NetworkParams) -> DerivedConstants:
    """Compute the delta/p_t/c1..c4 constant tuple from the parameters."""
    delta = 2.0 / params.alpha
    g1d = math.gamma(1.0 + delta)
    return DerivedConstants(
        delta=delta,
        p_t=math.exp(-params.beta * params.d**params.alpha),
        c1=math.pi * g1d,
        c2=math.pi * g1d * params.theta**delta * params.d**2,
        c3=2.0 * math.pi * g1d / (params.alpha - 2.0),
        c4=math.pi * g1d / (params.alpha - 1.0),
    )


def sample_w(rng: np.random.Generator, params: NetworkParams, size=None):
    """Draw the desired-link gain W, conditioned on the link being active.

    W is unit-rate exponential conditioned on W >= beta d^alpha; by
    memorylessness that is beta d^alpha plus a fresh Exp(1) draw.
    """
    return params.w_floor + rng.exponential(size=size)


def sample_g(
    rng: np.random.Generator,
    params: NetworkParams,
    consts: DerivedConstants,
    size=None,
):
    """Draw the primary interference power G exactly.

    Uses the inverse transform through the marked-process intensity:
    X ~ Gamma(L, 1) and G = (c1 lam / X)^(1/delta), which reproduces
    Pr(G <= g) = Q(L, c1 lam g^-delta).
    """
    x = rng.gamma(params.L, size=size)
    return (consts.c1 * params.lam / x) ** (1.0 / consts.delta)


def _check_positive_level(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if np.any(g <= 0):
        raise ValueError("interference level g must be > 0")
    return g


def cdf_primary(g, params: NetworkParams, consts: DerivedConstants):
    """CDF of the primary interference power G.

    Pr(G <= g) = sum_{k<L} x^k e^-x / k! with x = c1 lam g^-delta, i.e.
    the probability that fewer than L interferers exceed level g.
    """
    g = _check_positive_level(g)
    x = consts.c1 * params.lam * g**-consts.delta
    out = _sp.gammaincc(params.L, x)
    return float(out) if np.isscalar(out) or out.ndim == 0 else out


def pdf_primary(g, params: NetworkParams, consts: DerivedConstants):
    """PDF of the primary interference power G (lam > 0 required)."""
    if params.lam == 0:
        raise ValueError("G is degenerate at 0 when lam == 0; no density")
    g = _check_positive_level(g)
    L, delta = params.L, consts.delta
    c1lam = consts.c1 * params.lam
    out = (
        delta
        * c1lam**L
        * g ** (-delta * L - 1.0)
        * np.exp(-c1lam * g**-delta)
        / math.gamma(L)
    )
    return float(out) if np.isscalar(out) or out.ndim == 0 else out


def secondary_moments(g, params: NetworkParams, consts: DerivedConstants):
    """Mean and variance of the aggregate interference from nodes weaker
    than level g: (c3 lam g^(1-delta), c4 lam g^(2-delta))."""
    g = _check_positive_level(g)
    mean = consts.c3 * params.lam * g ** (1.0 - consts.delta)
    var = consts.c4 * params.lam * g ** (2.0 - consts.delta)
    if mean.ndim == 0:
        return float(mean), float(var)
    return mean, var


def marked_density_mu(g, params: NetworkParams, consts: DerivedConstants):
    """Expected number of interferers whose received power is >= g."""
    g = _check_positive_level(g)
    out = consts.c1 * params.lam * g**-consts.delta
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PrimaryInterferenceDist:
    """The law of the primary interference power, bundled with its inputs."""

    params: NetworkParams
    consts: DerivedConstants

    def cdf(self, g):
        return cdf_primary(g, self.params, self.consts)

    def pdf(self, g):
        return pdf_primary(g, self.params, self.consts)

    def sample(self, rng: np.random.Generator, size=None):
        return sample_g(rng, self.params, self.consts, size=size)
