"""Gamma-family special functions and exponential-weight quadrature.

Everything here is real-valued and limited to what the outage/capacity
formulas actually need: the complete gamma function, the regularized lower
incomplete gamma, the (non-regularized) upper incomplete gamma extended to
zero and negative first arguments, and adaptive integration over semi
infinite intervals with exponentially decaying integrands.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

from scipy import integrate
from scipy import special as _sp

__all__ = [
    "QuadratureSpec",
    "IntegrationError",
    "gamma_fn",
    "reg_lower_gamma",
    "upper_gamma_general",
    "integrate_semi_infinite",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and subdivision budget for adaptive quadrature."""

    relative_tolerance: float = 1e-10
    absolute_tolerance: float = 1e-14
    max_subdivisions: int = 200

    def __post_init__(self):
        if not self.relative_tolerance > 0:
            raise ValueError("relative_tolerance must be > 0")
        if not self.absolute_tolerance > 0:
            raise ValueError("absolute_tolerance must be > 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


_EULER = 0.5772156649015329
_ZETA2 = 1.6449340668482264
_ZETA3 = 1.2020569031595943


class IntegrationError(RuntimeError):
    """Quadrature failed to meet the requested tolerances.

    Carries the best available estimate and the achieved error bound so
    callers can decide whether the partial result is still usable.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (best estimate {estimate!r}, error bound {error:.3e})")
        self.estimate = estimate
        self.error = error


def gamma_fn(a: float) -> float:
    """Complete gamma function Gamma(a) for a > 0."""
    if not a > 0:
        raise ValueError(f"gamma_fn requires a > 0, got a={a}")
    return math.gamma(a)


def reg_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).

    Monotone nondecreasing in x, with P(a, 0) = 0 and P(a, x) -> 1.
    """
    if not a > 0:
        raise ValueError(f"reg_lower_gamma requires a > 0, got a={a}")
    if x < 0:
        raise ValueError(f"reg_lower_gamma requires x >= 0, got x={x}")
    return float(_sp.gammainc(a, x))


def _upper_gamma_small_series(s: float, x: float) -> float:
    """Gamma(s, x) for |s| <= 0.5 and small x, organized so the pole parts
    of Gamma(s) and of the continued lower incomplete gamma cancel exactly:

        Gamma(s, x) = (Gamma(1+s) - 1)/s + (1 - x^s)/s
                      - sum_{k>=1} (-1)^k x^(s+k) / (k! (s + k))
    """
    lnx = math.log(x)
    if abs(s) <= 1e-4:
        # log Gamma(1+s) by Taylor series; libm lgamma loses absolute
        # accuracy near its zero at 1, and 1+s rounds to 1 for tiny s
        lg = s * (-_EULER + s * (_ZETA2 / 2.0 - s * (_ZETA3 / 3.0)))
    else:
        lg = math.lgamma(1.0 + s)
    pole_part = math.expm1(lg) / s - math.expm1(s * lnx) / s
    xs = math.exp(s * lnx)
    acc = 0.0
    t = 1.0  # x^k / k!
    sign = 1.0
    for k in range(1, 500):
        t *= x / k
        sign = -sign
        term = sign * xs * t / (s + k)
        acc += term
        if abs(term) <= 1e-18 * max(abs(acc), 1e-30):
            break
    return pole_part - acc


def _upper_gamma_continued_fraction(a: float, x: float) -> float:
    """Gamma(a, x) by the classic continued fraction (DLMF 8.9.2);
    accurate for x above ~1.5 when a <= 0.5."""
    big = 4.503599627370496e15
    biginv = 2.220446049250313e-16
    ax = math.exp(a * math.log(x) - x)
    y = 1.0 - a
    z = x + y + 1.0
    c = 0.0
    pkm2, qkm2 = 1.0, x
    pkm1, qkm1 = x + 1.0, z * x
    ans = pkm1 / qkm1
    for _ in range(1000):
        c += 1.0
        y += 1.0
        z += 2.0
        yc = y * c
        pk = pkm1 * z - pkm2 * yc
        qk = qkm1 * z - qkm2 * yc
        if qk != 0.0:
            r = pk / qk
            t = abs((ans - r) / r)
            ans = r
        else:
            t = 1.0
        pkm2, pkm1 = pkm1, pk
        qkm2, qkm1 = qkm1, qk
        if abs(pk) > big:
            pkm2 *= biginv
            pkm1 *= biginv
            qkm2 *= biginv
            qkm1 *= biginv
        if t <= 1e-17:
            break
    return ans * ax


def _upper_gamma_small(s: float, x: float) -> float:
    """Gamma(s, x) near the pole region |s| <= 0.5 (both signs)."""
    if s == 0.0:
        return float(_sp.exp1(x))
    if x > 1.5:
        return _upper_gamma_continued_fraction(s, x)
    return _upper_gamma_small_series(s, x)


def upper_gamma_general(a: float, x: float) -> float:
    """Upper incomplete gamma Gamma(a, x) for any real a, including a <= 0.

    For a well above zero this is Gamma(a) * Q(a, x).  The integral
    int_x^inf t^(a-1) e^(-t) dt still converges for a <= 0 when x > 0 and
    is computed by the downward recurrence

        Gamma(s, x) = (Gamma(s + 1, x) - x^s e^(-x)) / s

    anchored at s0 = a + n in (-0.5, 0.5] so no recurrence step ever
    divides by a small s; the anchor itself comes from a cancellation-free
    series (small x) or continued fraction (large x).
    """
    if x < 0:
        raise ValueError(f"upper_gamma_general requires x >= 0, got x={x}")
    if x == 0:
        if a <= 0:
            raise ValueError(f"Gamma(a, 0) diverges for a <= 0 (a={a})")
        return math.gamma(a)
    if a > 0.5:
        return float(_sp.gammaincc(a, x)) * math.gamma(a)
    if a >= -0.5:
        return _upper_gamma_small(a, x)

    n = int(math.floor(0.5 - a))  # a + n in (-0.5, 0.5]
    s = a + n
    g = _upper_gamma_small(s, x)
    emx = math.exp(-x)
    for _ in range(n):
        s -= 1.0
        g = (g - x**s * emx) / s
    return g


def integrate_semi_infinite(
    f: Callable[[float], float],
    lower: float,
    spec: QuadratureSpec | None = None,
) -> float:
    """Integrate f over [lower, inf) for exponentially decaying f.

    The tail is mapped onto (0, 1] via t = lower - ln(u), which turns the
    exponential weight into a bounded factor, then adaptive subdivision
    (QUADPACK) is applied on the finite interval.  Raises IntegrationError
    when the requested tolerances cannot be met.
    """
    if spec is None:
        spec = QuadratureSpec()

    def mapped(u: float) -> float:
        t = lower - math.log(u)
        return f(t) / u

    kwargs = dict(
        epsabs=spec.absolute_tolerance,
        epsrel=spec.relative_tolerance,
        limit=spec.max_subdivisions,
    )
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            value, _ = integrate.quad(mapped, 0.0, 1.0, **kwargs)
    except integrate.IntegrationWarning as warn:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            value, abserr = integrate.quad(mapped, 0.0, 1.0, **kwargs)
        raise IntegrationError(str(warn), estimate=value, error=abserr) from None
    return value
