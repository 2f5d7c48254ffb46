"""Parameter sweeps, capacity inversion from simulated curves, and CSV output.

Three canned experiments mirror the study's figures:

* fig1 -- outage vs density: simulation against the analytic sandwich.
* fig2 -- capacity vs antenna count at fixed outage targets.
* fig3 -- capacity vs outage target against the asymptotic envelopes.

Every emitted dataset embeds the parameters, seed, and a build identifier
so a row can be regenerated from the CSV alone.  Unreported physical
parameters default to d = 1, theta = 1 (0 dB), and beta = -ln(0.95)
(95% activation); these are choices, stamped into every output.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    AsymptoticConstants,
    CapacityResult,
    REGIME_LOW_L,
    asymptotic_constants,
    outage_lower,
    outage_upper,
    solve_capacity,
)
from .model import NetworkParams, derive_constants
from .simulator import OutageEstimate, SimConfig, estimate_outage, min_region_radius

__all__ = [
    "ExperimentSpec",
    "CapacityCurve",
    "CapacityPoint",
    "NoCrossingError",
    "DEFAULT_BETA",
    "default_params",
    "build_id",
    "isotonic_fit",
    "invert_simulated_curve",
    "sweep_lambdas",
    "run_sweep",
    "run_fig1",
    "run_fig2",
    "run_fig3",
    "run_figure",
    "write_csv",
]

#: Activation threshold giving 95% transmission probability at d = 1.
DEFAULT_BETA = -math.log(0.95)

#: Log-spaced sweep resolution.
POINTS_PER_DECADE = 12

FIG1_COLUMNS = [
    "lambda", "L", "alpha", "theta", "beta", "d", "R", "trials", "seed",
    "mode", "pout_sim", "ci_low", "ci_high", "pout_lower_bound",
    "pout_upper_bound", "upper_bound_stderr",
    # extras beyond the base schema, for row-level reproducibility
    "streams", "version",
]
FIG2_COLUMNS = [
    "L", "epsilon", "lambda_eps", "capacity", "capacity_err_low",
    "capacity_err_high", "alpha", "theta", "beta", "d", "seed",
    "trials", "streams", "version",
]
FIG3_COLUMNS = [
    "L", "epsilon", "capacity_sim", "capacity_err_low", "capacity_err_high",
    "asym_low", "asym_high", "kappa1", "kappa2", "kappa3_or_blank",
    "alpha", "theta", "beta", "d", "seed", "trials", "streams", "version",
]


def default_params(lam: float = 0.01, L: int = 2) -> NetworkParams:
    """Baseline parameter set used by the canned experiments."""
    return NetworkParams(lam=lam, d=1.0, alpha=4.0, theta=1.0, beta=DEFAULT_BETA, L=L)


def build_id() -> str:
    """Short content hash of the package sources (git-style identifier)."""
    digest = hashlib.sha1()
    pkg_dir = Path(__file__).resolve().parent
    for path in sorted(pkg_dir.glob("*.py")):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()[:12]


def _version_tag() -> str:
    return f"{__version__}+{build_id()}"


@dataclass(frozen=True)
class ExperimentSpec:
    """A figure-style run: parameter grid, base params, and sim mechanics."""

    figure_id: str = "custom"
    params: NetworkParams = field(default_factory=default_params)
    sim: SimConfig = field(default_factory=SimConfig)
    lambdas: tuple[float, ...] | None = None
    l_values: tuple[int, ...] = (2, 4)
    epsilons: tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    modes: tuple[str, ...] = ("effective",)
    auto_radius: bool = True
    output: str | None = None

    def __post_init__(self):
        if self.figure_id not in ("fig1", "fig2", "fig3", "custom"):
            raise ValueError(f"unknown figure_id {self.figure_id!r}")
        if not self.l_values or not self.epsilons:
            raise ValueError("grids must be non-empty")
        if self.lambdas is not None:
            if len(self.lambdas) == 0:
                raise ValueError("lambda grid must be non-empty")
            if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])):
                raise ValueError("lambda values must be strictly increasing")
        for m in self.modes:
            if m not in ("effective", "channel"):
                raise ValueError(f"unknown mode {m!r}")


@dataclass(frozen=True)
class CapacityPoint:
    """Capacity at one outage target with propagated uncertainty."""

    result: CapacityResult
    capacity_err_low: float
    capacity_err_high: float


@dataclass(frozen=True)
class CapacityCurve:
    """Capacity as a function of the outage target for one antenna count."""

    L: int
    method: str
    points: tuple[CapacityPoint, ...]


class NoCrossingError(RuntimeError):
    """The simulated outage range does not bracket the requested target."""

    def __init__(self, epsilon, p_min, p_max):
        super().__init__(
            f"epsilon={epsilon:g} outside simulated outage range "
            f"[{p_min:g}, {p_max:g}]; refusing to extrapolate"
        )
        self.observed_range = (p_min, p_max)


def isotonic_fit(y, weights=None) -> np.ndarray:
    """Nondecreasing least-squares fit (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if y.ndim != 1 or w.shape != y.shape:
        raise ValueError("y and weights must be 1-D and the same length")
    # blocks of (weighted mean, weight, length), merged on violation
    means: list[float] = []
    wsum: list[float] = []
    size: list[int] = []
    for yi, wi in zip(y, w):
        means.append(float(yi))
        wsum.append(float(wi))
        size.append(1)
        while len(means) > 1 and means[-2] >= means[-1]:
            m2, w2, n2 = means.pop(), wsum.pop(), size.pop()
            m1, w1, n1 = means.pop(), wsum.pop(), size.pop()
            wt = w1 + w2
            means.append((m1 * w1 + m2 * w2) / wt)
            wsum.append(wt)
            size.append(n1 + n2)
    return np.repeat(means, size)


def _log_interp_crossing(lams, ps, target) -> float:
    """lambda at which the isotonized curve crosses the target, by linear
    interpolation in log-log coordinates (exact for power laws)."""
    for i in range(len(ps) - 1):
        lo, hi = ps[i], ps[i + 1]
        if lo <= 0:
            continue
        if lo <= target <= hi and lo < hi:
            t = (math.log(target) - math.log(lo)) / (math.log(hi) - math.log(lo))
            return math.exp(
                math.log(lams[i]) + t * (math.log(lams[i + 1]) - math.log(lams[i]))
            )
        if lo == target == hi:
            return math.sqrt(lams[i] * lams[i + 1])
    # exact hit on an endpoint
    if ps[0] == target > 0:
        return lams[0]
    if ps[-1] == target:
        return lams[-1]
    raise NoCrossingError(target, min(p for p in ps), max(ps))


def invert_simulated_curve(points, epsilon: float) -> CapacityPoint:
    """Find the density where a simulated outage curve crosses epsilon.

    Applies isotonic regression to the point estimates (and to the CI
    envelopes for the uncertainty), then interpolates log-log.  The grid
    must bracket the crossing; extrapolation is refused.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    pts = sorted(points, key=lambda lp: lp[0])
    lams = np.array([lp[0] for lp in pts], dtype=float)
    ests: list[OutageEstimate] = [lp[1] for lp in pts]
    if len(lams) < 2:
        raise ValueError("need at least two grid points")
    p_hat = isotonic_fit([e.p_hat for e in ests])
    positive = p_hat[p_hat > 0]
    p_min = float(positive.min()) if positive.size else 0.0
    p_max = float(p_hat.max())
    if not (p_min <= epsilon <= p_max) or p_min == 0.0 and epsilon < p_hat[-1] == 0:
        raise NoCrossingError(epsilon, p_min, p_max)

    lam_eps = _log_interp_crossing(lams, p_hat, epsilon)

    # CI envelopes: the upper CI curve crosses epsilon at a smaller density.
    hi_curve = isotonic_fit([e.ci_high for e in ests])
    lo_curve = isotonic_fit([e.ci_low for e in ests])
    try:
        lam_lo = _log_interp_crossing(lams, hi_curve, epsilon)
    except NoCrossingError:
        lam_lo = float(lams[0])
    try:
        lam_hi = _log_interp_crossing(lams, lo_curve, epsilon)
    except NoCrossingError:
        lam_hi = float(lams[-1])

    result = CapacityResult.from_lambda(epsilon, lam_eps, "simulation")
    return CapacityPoint(
        result=result,
        capacity_err_low=(1.0 - epsilon) * min(lam_lo, lam_eps),
        capacity_err_high=(1.0 - epsilon) * max(lam_hi, lam_eps),
    )


def _radius_for(params: NetworkParams, spec: ExperimentSpec) -> float:
    if spec.auto_radius:
        return max(min_region_radius(params), 10.0 * params.d)
    return spec.sim.region_radius


def sweep_lambdas(
    params: NetworkParams,
    p_low: float,
    p_high: float,
    points_per_decade: int = POINTS_PER_DECADE,
    mc_samples: int = 100_000,
) -> np.ndarray:
    """Log-spaced density grid whose simulated outage should span
    [p_low, p_high], anchored on the analytic bound sandwich.

    The upper bound locates the density where outage is surely above
    p_low; the lower bound locates where it is surely below p_high.
    """
    consts = derive_constants(params)

    def lower_curve(lam):
        return outage_lower(replace(params, lam=lam), consts)

    def upper_curve(lam):
        rng = np.random.default_rng(12345)
        return outage_upper(replace(params, lam=lam), consts, mc_samples, rng)[0]

    hint = 0.01 / params.d**2
    lam_lo = solve_capacity(p_low, upper_curve, hint).lambda_eps
    lam_hi = solve_capacity(p_high, lower_curve, hint).lambda_eps
    n = max(2, int(math.ceil(math.log10(lam_hi / lam_lo) * points_per_decade)) + 1)
    return np.geomspace(lam_lo, lam_hi, n)


def run_sweep(
    params: NetworkParams, spec: ExperimentSpec, lambdas, mode: str
) -> list[tuple[float, OutageEstimate]]:
    """Estimate outage on a density grid, one SimConfig per point."""
    out = []
    for lam in lambdas:
        p = replace(params, lam=float(lam))
        cfg = replace(spec.sim, mode=mode, region_radius=_radius_for(p, spec))
        out.append((float(lam), estimate_outage(p, cfg)))
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path, columns, rows) -> None:
    """UTF-8, LF-terminated CSV with floats at 17 significant digits."""
    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row length does not match the column list")
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def run_fig1(spec: ExperimentSpec):
    """Outage vs density: simulated estimates against the bound sandwich.

    One row per (lambda, L, mode).  The lambda grid, unless given, is
    chosen per L so the simulated outage spans roughly [1e-3, 0.3].
    """
    rows = []
    version = _version_tag()
    for L in spec.l_values:
        base = replace(spec.params, L=int(L))
        consts = derive_constants(base)
        lambdas = (
            np.asarray(spec.lambdas)
            if spec.lambdas is not None
            else sweep_lambdas(base, 1e-3, 0.3)
        )
        for lam in lambdas:
            p = replace(base, lam=float(lam))
            p_low = outage_lower(p, consts)
            rng = np.random.default_rng(spec.sim.seed)
            p_up, up_se = outage_upper(p, consts, 400_000, rng)
            p_up = max(p_up, p_low)
            for mode in spec.modes:
                cfg = replace(spec.sim, mode=mode, region_radius=_radius_for(p, spec))
                est = estimate_outage(p, cfg)
                rows.append([
                    float(lam), int(L), p.alpha, p.theta, p.beta, p.d,
                    cfg.region_radius, cfg.trials, cfg.seed, mode,
                    est.p_hat, est.ci_low, est.ci_high, p_low, p_up, up_se,
                    cfg.stream_count, version,
                ])
    return FIG1_COLUMNS, rows


def _capacity_sweep(
    base: NetworkParams, spec: ExperimentSpec, epsilons
) -> tuple[list, dict]:
    """One density sweep covering all epsilon targets, then inversions."""
    eps_min, eps_max = min(epsilons), max(epsilons)
    lambdas = sweep_lambdas(base, 0.6 * eps_min, 1.6 * eps_max)
    points = run_sweep(base, spec, lambdas, spec.modes[0])
    inversions = {eps: invert_simulated_curve(points, eps) for eps in epsilons}
    return points, inversions


def run_fig2(spec: ExperimentSpec):
    """Capacity vs antenna count for each outage target."""
    rows = []
    version = _version_tag()
    l_values = spec.l_values if spec.l_values != (2, 4) else tuple(range(1, 9))
    for L in l_values:
        base = replace(spec.params, L=int(L))
        _, inversions = _capacity_sweep(base, spec, spec.epsilons)
        for eps in spec.epsilons:
            pt = inversions[eps]
            rows.append([
                int(L), eps, pt.result.lambda_eps, pt.result.capacity,
                pt.capacity_err_low, pt.capacity_err_high,
                base.alpha, base.theta, base.beta, base.d, spec.sim.seed,
                spec.sim.trials, spec.sim.stream_count, version,
            ])
    return FIG2_COLUMNS, rows


def run_fig3(spec: ExperimentSpec):
    """Simulated capacity against the asymptotic power-law envelopes."""
    rows = []
    version = _version_tag()
    l_values = spec.l_values if spec.l_values != (2, 4) else (2, 3, 4)
    for L in l_values:
        base = replace(spec.params, L=int(L))
        consts = derive_constants(base)
        kappas = asymptotic_constants(base, consts)
        _, inversions = _capacity_sweep(base, spec, spec.epsilons)
        for eps in sorted(spec.epsilons):
            pt = inversions[eps]
            lo_env, hi_env = _capacity_envelopes(base, kappas, eps)
            rows.append([
                int(L), eps, pt.result.capacity,
                pt.capacity_err_low, pt.capacity_err_high,
                lo_env, hi_env, kappas.kappa1, kappas.kappa2,
                "" if kappas.kappa3 is None else kappas.kappa3,
                base.alpha, base.theta, base.beta, base.d, spec.sim.seed,
                spec.sim.trials, spec.sim.stream_count, version,
            ])
    return FIG3_COLUMNS, rows


def _capacity_envelopes(
    params: NetworkParams, kappas: AsymptoticConstants, epsilon: float
) -> tuple[float, float]:
    """Asymptotic capacity band (lo, hi) implied by the outage envelopes."""
    hi = (1.0 - epsilon) * (epsilon / kappas.kappa1) ** (1.0 / params.L)
    if kappas.regime == REGIME_LOW_L:
        lo = (1.0 - epsilon) * (
            epsilon / (kappas.kappa1 * (1.0 + kappas.kappa2))
        ) ** (1.0 / params.L)
    else:
        lo = (1.0 - epsilon) * (epsilon / kappas.kappa3) ** (1.0 / params.alpha)
    return lo, hi


_RUNNERS = {"fig1": run_fig1, "fig2": run_fig2, "fig3": run_fig3}


def run_figure(spec: ExperimentSpec, out_path=None):
    """Run a canned figure experiment and optionally write its CSV."""
    if spec.figure_id not in _RUNNERS:
        raise ValueError(f"no canned runner for figure_id {spec.figure_id!r}")
    columns, rows = _RUNNERS[spec.figure_id](spec)
    target = out_path or spec.output
    if target:
        write_csv(target, columns, rows)
    return columns, rows
