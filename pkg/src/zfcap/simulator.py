"""Monte Carlo network simulation.

Two modes share one outage estimator:

* ``channel`` -- full channel-level trials: complex Gaussian MIMO channels,
  isotropic transmit beamformers, interferers sorted by effective-channel
  norm, and an exact zero-forcing receive beamformer nulling the strongest
  min(L-1, count) of them.
* ``effective`` -- the scalar reduction of the same system: marks
  I_n = r_n^-alpha * rho_n with rho_n ~ Exp(1), the largest min(L-1, count)
  marks removed before the SIR test.

The two orderings differ (channel norm vs post-beamforming power); the gap
is a property of the model, not hidden by the code.  Interferers are
placed directly at the active density: each node's on/off decision depends
only on its own link gain, so opportunistic thinning is exact.

Trials are partitioned over independently seeded substreams; results are
reproducible given (seed, trials, stream_count) regardless of scheduling.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import DerivedConstants, NetworkParams, sample_w

__all__ = [
    "SimConfig",
    "ChannelTrial",
    "EffectiveTrial",
    "OutageEstimate",
    "CampbellStats",
    "ChannelStats",
    "TruncationWarning",
    "sample_ppp",
    "zf_receive_beamformer",
    "run_trial",
    "estimate_outage",
    "campbell_stats",
    "channel_statistics",
    "simulate_marks",
    "min_region_radius",
    "wilson_interval",
]

logger = logging.getLogger(__name__)

#: 97.5% normal quantile, for 95% Wilson intervals.
_Z95 = 1.959963984540054

#: Neglected far-field interference must stay below this fraction of the
#: typical signal power d^-alpha theta^-1 E[W].
_TRUNCATION_FRACTION = 1e-3

_MODES = ("channel", "effective")


class TruncationWarning(UserWarning):
    """Region radius too small for the requested density."""


@dataclass(frozen=True)
class SimConfig:
    """Simulation mechanics: mode, region, trial count, and seeding."""

    mode: str = "effective"
    region_radius: float = 100.0
    trials: int = 10_000
    seed: int = 0
    stream_count: int = 1

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if not self.region_radius > 0:
            raise ValueError("region_radius must be > 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.stream_count < 1:
            raise ValueError("stream_count must be >= 1")


@dataclass
class EffectiveTrial:
    """One effective-mode network draw."""

    distances: np.ndarray
    marks: np.ndarray
    interference: np.ndarray
    canceled: np.ndarray
    w: float
    sir: float
    outage: bool


@dataclass
class ChannelTrial:
    """One channel-level network draw, beamformers included."""

    interferer_positions: np.ndarray
    channel_matrices: np.ndarray
    transmit_beamformers: np.ndarray
    receive_beamformer: np.ndarray
    effective_channels: np.ndarray
    canceled: np.ndarray
    w: float
    sir: float
    outage: bool


@dataclass(frozen=True)
class OutageEstimate:
    """Outage fraction with a 95% Wilson interval and its provenance."""

    p_hat: float
    ci_low: float
    ci_high: float
    trials: int
    seed: int
    mode: str
    stream_count: int

    def __post_init__(self):
        if not self.ci_low <= self.p_hat <= self.ci_high:
            raise ValueError("Wilson interval must contain the point estimate")


@dataclass(frozen=True)
class CampbellStats:
    """Empirical moments of the below-level aggregate interference."""

    mean: float
    variance: float
    mean_se: float
    variance_se: float
    realizations: int


@dataclass(frozen=True)
class ChannelStats:
    """Zero-forcing diagnostics pooled over channel-mode trials."""

    max_residual_ratio: float
    post_cancel_gains: np.ndarray  # |v0^H G_n f_n|^2 of non-canceled nodes
    trials: int


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """95% Wilson score interval, stable near p = 0 and p = 1."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (
        z
        * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))
        / denom
    )
    return max(center - half, 0.0), min(center + half, 1.0)


def min_region_radius(params: NetworkParams) -> float:
    """Smallest region radius honoring the far-field truncation rule.

    The mean interference from nodes beyond R is 2 pi lam R^(2-alpha)
    / (alpha - 2); it must not exceed a small fraction of the typical
    signal power.  Never below 10 link distances.
    """
    signal = params.d**-params.alpha / params.theta * (params.w_floor + 1.0)
    budget = _TRUNCATION_FRACTION * signal
    if params.lam > 0:
        r_rule = (2.0 * math.pi * params.lam / ((params.alpha - 2.0) * budget)) ** (
            1.0 / (params.alpha - 2.0)
        )
    else:
        r_rule = 0.0
    return max(10.0 * params.d, 1.000001 * r_rule)


def _check_radius(params: NetworkParams, radius: float) -> None:
    if radius < 10.0 * params.d:
        raise ValueError(
            f"region_radius must be >= 10*d = {10 * params.d}, got {radius}"
        )
    tail = (
        2.0
        * math.pi
        * params.lam
        * radius ** (2.0 - params.alpha)
        / (params.alpha - 2.0)
    )
    signal = params.d**-params.alpha / params.theta * (params.w_floor + 1.0)
    if tail > _TRUNCATION_FRACTION * signal:
        warnings.warn(
            f"neglected far-field mean {tail:.3e} exceeds "
            f"{_TRUNCATION_FRACTION:g} of the signal scale {signal:.3e}; "
            f"increase region_radius above {min_region_radius(params):.3g}",
            TruncationWarning,
            stacklevel=3,
        )


def sample_ppp(rng: np.random.Generator, density: float, radius: float) -> np.ndarray:
    """Poisson point process on a disk centered at the typical receiver.

    Returns an (n, 2) array; n ~ Poisson(density * pi * radius^2) and the
    points are i.i.d. uniform on the disk.
    """
    if density < 0:
        raise ValueError("density must be >= 0")
    if not radius > 0:
        raise ValueError("radius must be > 0")
    n = rng.poisson(density * math.pi * radius * radius)
    r = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def zf_receive_beamformer(
    effective_channels, tie_break_basis=None, dependence_tol: float = 1e-10
) -> np.ndarray:
    """Unit receive beamformer orthogonal to the given effective channels.

    The channels are orthonormalized (numerically dependent ones are
    dropped and logged); the tie-break basis vectors are then projected
    out of the span in fixed order and the first nonzero residual is
    normalized.  Deterministic given its inputs, and independent of the
    desired link's channel by construction.
    """
    channels = [np.asarray(h, dtype=complex) for h in effective_channels]
    if channels:
        dim = channels[0].shape[0]
    elif tie_break_basis is not None:
        dim = np.asarray(tie_break_basis).shape[1]
    else:
        raise ValueError("need a tie_break_basis when no channels are given")
    if tie_break_basis is None:
        tie_break_basis = np.eye(dim, dtype=complex)
    basis = np.asarray(tie_break_basis, dtype=complex)

    ortho: list[np.ndarray] = []
    for h in channels:
        if len(ortho) >= dim:
            raise ValueError("more independent channels than antenna dimensions")
        r = h.astype(complex, copy=True)
        for _ in range(2):  # second pass restores orthogonality lost to rounding
            for q in ortho:
                r -= q * np.vdot(q, r)
        nr = np.linalg.norm(r)
        if nr <= dependence_tol * np.linalg.norm(h):
            logger.warning(
                "dropping numerically dependent channel (residual %.3e)", nr
            )
            continue
        ortho.append(r / nr)

    for e in basis:
        r = e.astype(complex, copy=True)
        for _ in range(2):
            for q in ortho:
                r -= q * np.vdot(q, r)
        nr = np.linalg.norm(r)
        if nr > 1e-6:
            return r / nr
    raise ValueError("tie-break basis lies in the span of the channels")


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    # i.i.d. CN(0, 1) entries
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _isotropic_unit_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    z = _complex_gaussian(rng, (n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def run_trial(rng: np.random.Generator, params: NetworkParams, config: SimConfig):
    """Run a single network trial and return its full record."""
    if config.mode == "effective":
        return _run_effective_trial(rng, params, config.region_radius)
    return _run_channel_trial(rng, params, config.region_radius)


def _run_effective_trial(rng, params: NetworkParams, radius: float) -> EffectiveTrial:
    pts = sample_ppp(rng, params.lam, radius)
    r = np.hypot(pts[:, 0], pts[:, 1])
    rho = rng.exponential(size=r.size)
    interference = r**-params.alpha * rho
    order = np.argsort(-interference, kind="stable")
    k = min(params.L - 1, r.size)
    canceled = order[:k]
    w = float(sample_w(rng, params))
    residual = float(interference[order[k:]].sum())
    signal = params.d**-params.alpha * w
    sir = signal / residual if residual > 0 else math.inf
    return EffectiveTrial(
        distances=r,
        marks=rho,
        interference=interference,
        canceled=canceled,
        w=w,
        sir=sir,
        outage=bool(sir <= params.theta),
    )


def _run_channel_trial(rng, params: NetworkParams, radius: float) -> ChannelTrial:
    L = params.L
    pts = sample_ppp(rng, params.lam, radius)
    n = pts.shape[0]
    r = np.hypot(pts[:, 0], pts[:, 1])
    gmat = _complex_gaussian(rng, (n, L, L))
    f = _isotropic_unit_vectors(rng, n, L)
    h_fading = np.einsum("nij,nj->ni", gmat, f)
    h = r[:, None] ** (-params.alpha / 2.0) * h_fading
    order = np.argsort(-np.linalg.norm(h, axis=1), kind="stable")
    k = min(L - 1, n)
    canceled = order[:k]
    v0 = zf_receive_beamformer(h[canceled])
    w = float(sample_w(rng, params))
    gains = np.abs(h @ v0.conj()) ** 2
    residual = float(gains[order[k:]].sum())
    signal = params.d**-params.alpha * w
    sir = signal / residual if residual > 0 else math.inf
    return ChannelTrial(
        interferer_positions=pts,
        channel_matrices=gmat,
        transmit_beamformers=f,
        receive_beamformer=v0,
        effective_channels=h,
        canceled=canceled,
        w=w,
        sir=sir,
        outage=bool(sir <= params.theta),
    )


# --- bulk paths -----------------------------------------------------------

#: Soft cap on marks held in memory per vectorized block.
_BLOCK_MARK_BUDGET = 4_000_000


def _block_sizes(trials: int, mean_count: float) -> list[int]:
    per_block = max(1, int(_BLOCK_MARK_BUDGET / max(mean_count, 1.0)))
    per_block = min(per_block, 200_000)
    sizes = []
    left = trials
    while left > 0:
        take = min(per_block, left)
        sizes.append(take)
        left -= take
    return sizes


def _effective_outages(rng, params: NetworkParams, radius: float, m: int) -> int:
    """Vectorized effective-mode block: returns the number of outages."""
    lam, alpha, L = params.lam, params.alpha, params.L
    mu = lam * math.pi * radius * radius
    counts = rng.poisson(mu, m)
    total = int(counts.sum())
    r = radius * np.sqrt(rng.random(total))
    rho = rng.exponential(size=total)
    w = sample_w(rng, params, size=m)

    marks = r**-alpha * rho
    seg = np.repeat(np.arange(m), counts)
    starts = np.zeros(m, dtype=np.int64)
    np.cumsum(counts[:-1], out=starts[1:])

    # Remove the largest remaining mark of each trial, L-1 times.  Cleared
    # marks are set to 0, so exhausted trials self-noop (all marks > 0 a.s.).
    if total > 0:
        clipped = np.minimum(starts, total - 1)
        for _ in range(L - 1):
            seg_max = np.maximum.reduceat(marks, clipped)
            cand = np.flatnonzero(marks == np.repeat(seg_max, counts))
            if cand.size == 0:
                break
            segcand = seg[cand]
            first = np.ones(cand.size, dtype=bool)
            first[1:] = segcand[1:] != segcand[:-1]
            marks[cand[first]] = 0.0
        kept = np.bincount(seg, weights=marks, minlength=m)
    else:
        kept = np.zeros(m)

    signal = params.d**-alpha * w
    with np.errstate(divide="ignore"):
        sir = np.where(kept > 0, signal / np.where(kept > 0, kept, 1.0), np.inf)
    return int(np.count_nonzero(sir <= params.theta))


def _channel_outages(
    rng,
    params: NetworkParams,
    radius: float,
    m: int,
    stats: dict | None = None,
) -> int:
    """Channel-mode block: explicit fading matrices and beamformers."""
    lam, alpha, L = params.lam, params.alpha, params.L
    mu = lam * math.pi * radius * radius
    counts = rng.poisson(mu, m)
    total = int(counts.sum())
    r = radius * np.sqrt(rng.random(total))
    gmat = _complex_gaussian(rng, (total, L, L))
    f = _isotropic_unit_vectors(rng, total, L) if total else np.zeros((0, L), complex)
    w = sample_w(rng, params, size=m)

    h_fading = np.einsum("nij,nj->ni", gmat, f)
    h = r[:, None] ** (-alpha / 2.0) * h_fading
    hnorm = np.linalg.norm(h, axis=1)

    theta, signal_scale = params.theta, params.d**-alpha
    outages = 0
    start = 0
    for i in range(m):
        n = counts[i]
        stop = start + n
        if n == 0:
            start = stop
            continue
        hs = h[start:stop]
        order = np.argsort(-hnorm[start:stop], kind="stable")
        k = min(L - 1, n)
        v0 = zf_receive_beamformer(hs[order[:k]])
        gains = np.abs(hs @ v0.conj()) ** 2
        residual = gains[order[k:]].sum()
        if residual > 0 and signal_scale * w[i] / residual <= theta:
            outages += 1
        if stats is not None:
            # leakage through the null vs total incident interference power
            canceled_power = gains[order[:k]].sum()
            incident_power = float(np.sum(np.abs(hs) ** 2))
            if incident_power > 0:
                ratio = canceled_power / incident_power
                if ratio > stats["max_residual_ratio"]:
                    stats["max_residual_ratio"] = ratio
            if k < n:
                fading_gains = np.abs(h_fading[start:stop] @ v0.conj()) ** 2
                stats["gains"].append(fading_gains[order[k:]])
        start = stop
    return outages


def _substream_rngs(seed: int, stream_count: int) -> list[np.random.Generator]:
    base = int(seed) & 0xFFFFFFFFFFFFFFFF
    return [
        np.random.default_rng(np.random.SeedSequence([base, i]))
        for i in range(stream_count)
    ]


def _partition(trials: int, stream_count: int) -> list[int]:
    share, extra = divmod(trials, stream_count)
    return [share + (1 if i < extra else 0) for i in range(stream_count)]


def estimate_outage(params: NetworkParams, config: SimConfig) -> OutageEstimate:
    """Outage fraction over independent trials with a 95% Wilson interval.

    Trials are split across ``stream_count`` substreams, substream i
    seeded by (seed, i); the result is bit-identical for fixed
    (seed, trials, stream_count) however the work is scheduled.
    """
    if config.trials < 100:
        raise ValueError("trials must be >= 100 for a meaningful estimate")
    _check_radius(params, config.region_radius)
    block = _effective_outages if config.mode == "effective" else _channel_outages
    mean_count = params.lam * math.pi * config.region_radius**2

    outages = 0
    for rng, share in zip(
        _substream_rngs(config.seed, config.stream_count),
        _partition(config.trials, config.stream_count),
    ):
        for size in _block_sizes(share, mean_count):
            outages += block(rng, params, config.region_radius, size)

    p_hat = outages / config.trials
    ci_low, ci_high = wilson_interval(outages, config.trials)
    return OutageEstimate(
        p_hat=p_hat,
        ci_low=min(ci_low, p_hat),
        ci_high=max(ci_high, p_hat),
        trials=config.trials,
        seed=config.seed,
        mode=config.mode,
        stream_count=config.stream_count,
    )


def channel_statistics(
    params: NetworkParams, config: SimConfig
) -> tuple[OutageEstimate, ChannelStats]:
    """Channel-mode run that also pools zero-forcing diagnostics."""
    if config.mode != "channel":
        raise ValueError("channel_statistics requires mode='channel'")
    _check_radius(params, config.region_radius)
    mean_count = params.lam * math.pi * config.region_radius**2
    stats = {"max_residual_ratio": 0.0, "gains": []}

    outages = 0
    for rng, share in zip(
        _substream_rngs(config.seed, config.stream_count),
        _partition(config.trials, config.stream_count),
    ):
        for size in _block_sizes(share, mean_count):
            outages += _channel_outages(rng, params, config.region_radius, size, stats)

    p_hat = outages / config.trials
    ci_low, ci_high = wilson_interval(outages, config.trials)
    estimate = OutageEstimate(
        p_hat=p_hat,
        ci_low=min(ci_low, p_hat),
        ci_high=max(ci_high, p_hat),
        trials=config.trials,
        seed=config.seed,
        mode=config.mode,
        stream_count=config.stream_count,
    )
    gains = (
        np.concatenate(stats["gains"]) if stats["gains"] else np.empty(0)
    )
    return estimate, ChannelStats(
        max_residual_ratio=stats["max_residual_ratio"],
        post_cancel_gains=gains,
        trials=config.trials,
    )


def simulate_marks(
    rng: np.random.Generator, params: NetworkParams, radius: float, trials: int
) -> tuple[np.ndarray, np.ndarray]:
    """Raw effective-mode marks for distribution-level checks.

    Returns (counts, flat_marks): counts[i] marks belong to realization i,
    concatenated in order in flat_marks.
    """
    mu = params.lam * math.pi * radius * radius
    counts = rng.poisson(mu, trials)
    total = int(counts.sum())
    r = radius * np.sqrt(rng.random(total))
    rho = rng.exponential(size=total)
    return counts, r**-params.alpha * rho


def campbell_stats(
    params: NetworkParams,
    g: float,
    realizations: int,
    rng: np.random.Generator,
    radius: float | None = None,
) -> CampbellStats:
    """Empirical mean/variance of the aggregate interference below level g.

    Simulates the conditional secondary process (marks restricted to
    I_n < g) and sums per realization; standard errors come from the
    sample's second and fourth central moments.
    """
    if not g > 0:
        raise ValueError("conditioning level g must be > 0")
    if realizations < 1_000:
        raise ValueError("need at least 1000 realizations")
    if radius is None:
        radius = min_region_radius(params)
    _check_radius(params, radius)

    mean_count = params.lam * math.pi * radius * radius
    sums = np.empty(realizations)
    done = 0
    for size in _block_sizes(realizations, mean_count):
        counts, marks = simulate_marks(rng, params, radius, size)
        seg = np.repeat(np.arange(size), counts)
        below = marks < g
        sums[done : done + size] = np.bincount(
            seg[below], weights=marks[below], minlength=size
        )
        done += size

    mean = float(sums.mean())
    var = float(sums.var(ddof=1))
    centered = sums - mean
    m4 = float(np.mean(centered**4))
    mean_se = math.sqrt(var / realizations)
    var_se = math.sqrt(max(m4 - var * var, 0.0) / realizations)
    return CampbellStats(mean, var, mean_se, var_se, realizations)
