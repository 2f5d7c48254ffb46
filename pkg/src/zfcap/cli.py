"""Command-line front end.

Subcommands map onto the library surface: ``bounds`` (analytic sandwich and
scaling constants), ``simulate`` (Monte Carlo outage), ``capacity``
(outage-constraint inversion), ``figures`` (canned CSV experiments), and
``validate`` (the invariant smoke suite).  Flags override config-file
values; every output echoes the effective configuration, seed, and version.

Config files are flat ``key = value`` text, one key per line, ``#`` for
comments.  Unknown keys are a hard error.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import stats as _stats

from . import __version__
from .analysis import (
    BracketError,
    asymptotic_constants,
    capacity_sensitivity,
    outage_lower,
    outage_upper,
    solve_capacity,
)
from .experiments import (
    DEFAULT_BETA,
    ExperimentSpec,
    NoCrossingError,
    build_id,
    default_params,
    invert_simulated_curve,
    run_figure,
    run_sweep,
    sweep_lambdas,
)
from .model import NetworkParams, cdf_primary, derive_constants, sample_g, sample_w
from .simulator import SimConfig, campbell_stats, estimate_outage, min_region_radius
from .special import IntegrationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_PARAM_KEYS = {
    "lambda": ("lam", float),
    "d": ("d", float),
    "alpha": ("alpha", float),
    "theta": ("theta", float),
    "beta": ("beta", float),
    "L": ("L", int),
}
_SIM_KEYS = {
    "mode": ("mode", str),
    "region_radius": ("region_radius", float),
    "trials": ("trials", int),
    "seed": ("seed", int),
    "stream_count": ("stream_count", int),
}
_SPEC_KEYS = {
    "figure_id": ("figure_id", str),
    "l_values": ("l_values", lambda s: tuple(int(v) for v in s.split(","))),
    "epsilons": ("epsilons", lambda s: tuple(float(v) for v in s.split(","))),
    "lambdas": ("lambdas", lambda s: tuple(float(v) for v in s.split(","))),
    "modes": ("modes", lambda s: tuple(v.strip() for v in s.split(","))),
    "auto_radius": ("auto_radius", lambda s: s.lower() in ("1", "true", "yes")),
    "output": ("output", str),
}
_KNOWN_KEYS = set(_PARAM_KEYS) | set(_SIM_KEYS) | set(_SPEC_KEYS)


class UsageError(Exception):
    pass


def parse_config_file(path) -> dict:
    """Flat key = value config; '#' comments; unknown keys are fatal."""
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zfcap",
        description="Outage bounds, capacity scaling, and network simulation "
        "for zero-forcing interference cancellation",
    )
    parser.add_argument("--version", action="version", version=f"zfcap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--lambda", dest="lam", type=float, help="active density")
        p.add_argument("--d", type=float, help="link distance")
        p.add_argument("--alpha", type=float, help="path-loss exponent")
        p.add_argument("--theta", type=float, help="SIR threshold (linear)")
        p.add_argument("--beta", type=float, help="activation gain threshold")
        p.add_argument("--L", type=int, help="antennas per node")
        p.add_argument("--trials", type=int, help="simulation trials / MC samples")
        p.add_argument("--seed", type=int, help="base RNG seed")
        p.add_argument("--streams", type=int, help="substream count")
        p.add_argument("--radius", type=float, help="simulation region radius")
        p.add_argument("--mode", choices=("effective", "channel"))
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p_bounds = sub.add_parser("bounds", help="analytic outage bounds and constants")
    add_common(p_bounds)

    p_sim = sub.add_parser("simulate", help="Monte Carlo outage estimate")
    add_common(p_sim)

    p_cap = sub.add_parser("capacity", help="invert an outage curve at epsilon")
    add_common(p_cap)
    p_cap.add_argument("--epsilon", type=float, required=True)
    p_cap.add_argument(
        "--method", choices=("lower", "upper", "simulation"), default="lower"
    )

    p_fig = sub.add_parser("figures", help="run a canned figure experiment")
    add_common(p_fig)
    p_fig.add_argument("--id", dest="figure_id", choices=("fig1", "fig2", "fig3"),
                       required=True)

    p_val = sub.add_parser("validate", help="run the invariant suite")
    add_common(p_val)
    return parser


def _merged_values(args) -> dict:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    overrides = {
        "lambda": args.lam,
        "d": args.d,
        "alpha": args.alpha,
        "theta": args.theta,
        "beta": args.beta,
        "L": args.L,
        "trials": args.trials,
        "seed": args.seed,
        "stream_count": args.streams,
        "region_radius": args.radius,
        "mode": args.mode,
    }
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    return values


def _network_params(values: dict, default_lam: float = 0.01) -> NetworkParams:
    kwargs = {"lam": default_lam, "d": 1.0, "alpha": 4.0, "theta": 1.0,
              "beta": DEFAULT_BETA, "L": 2}
    for key, (attr, conv) in _PARAM_KEYS.items():
        if key in values:
            kwargs[attr] = conv(values[key])
    return NetworkParams(**kwargs)


def _sim_config(values: dict, params: NetworkParams) -> SimConfig:
    kwargs = {
        "mode": "effective",
        "region_radius": 100.0 * params.d,
        "trials": 10_000,
        "seed": 0,
        "stream_count": os.cpu_count() or 1,
    }
    for key, (attr, conv) in _SIM_KEYS.items():
        if key in values:
            kwargs[attr] = conv(values[key])
    return SimConfig(**kwargs)


def _params_dict(params: NetworkParams) -> dict:
    return {
        "lambda": params.lam,
        "d": params.d,
        "alpha": params.alpha,
        "theta": params.theta,
        "beta": params.beta,
        "L": params.L,
    }


def _emit(payload: dict, out_path) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _version_payload() -> str:
    return f"{__version__}+{build_id()}"


def _cmd_bounds(args) -> int:
    values = _merged_values(args)
    params = _network_params(values)
    consts = derive_constants(params)
    mc = int(values.get("trials", 200_000))
    seed = int(values.get("seed", 0))
    lower = outage_lower(params, consts)
    upper, stderr = outage_upper(
        params, consts, max(mc, 10_000), np.random.default_rng(seed)
    )
    upper = min(max(upper, lower), 1.0)
    payload = {
        "params": _params_dict(params),
        "derived": {
            "delta": consts.delta, "p_t": consts.p_t, "c1": consts.c1,
            "c2": consts.c2, "c3": consts.c3, "c4": consts.c4,
        },
        "pout_lower": lower,
        "pout_upper": upper,
        "upper_stderr": stderr,
        "mc_samples": max(mc, 10_000),
        "seed": seed,
        "version": _version_payload(),
    }
    try:
        kappas = asymptotic_constants(params, consts)
        payload["kappa1"] = kappas.kappa1
        payload["kappa2"] = kappas.kappa2
        if kappas.kappa3 is not None:
            payload["kappa3"] = kappas.kappa3
        payload["regime"] = kappas.regime
    except ValueError as exc:
        payload["kappa_error"] = str(exc)
    _emit(payload, args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    values = _merged_values(args)
    params = _network_params(values)
    config = _sim_config(values, params)
    est = estimate_outage(params, config)
    payload = {
        "params": _params_dict(params),
        "sim": {
            "mode": config.mode,
            "region_radius": config.region_radius,
            "trials": config.trials,
            "seed": config.seed,
            "stream_count": config.stream_count,
        },
        "p_hat": est.p_hat,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "version": _version_payload(),
    }
    _emit(payload, args.out)
    return EXIT_OK


def _cmd_capacity(args) -> int:
    values = _merged_values(args)
    params = _network_params(values)
    consts = derive_constants(params)
    epsilon = args.epsilon
    seed = int(values.get("seed", 0))
    hint = 0.01 / params.d**2

    if args.method == "lower":
        result = solve_capacity(
            epsilon,
            lambda lam: outage_lower(replace(params, lam=lam), consts),
            hint,
            method="lower_bound",
        )
        errs = {}
    elif args.method == "upper":
        mc = max(int(values.get("trials", 200_000)), 10_000)

        def upper_curve(lam):
            rng = np.random.default_rng(seed)
            return outage_upper(replace(params, lam=lam), consts, mc, rng)[0]

        result = solve_capacity(epsilon, upper_curve, hint, method="upper_bound")
        errs = {"mc_samples": mc}
    else:
        spec = ExperimentSpec(params=params, sim=_sim_config(values, params))
        lambdas = sweep_lambdas(params, 0.6 * epsilon, 1.6 * epsilon)
        points = run_sweep(params, spec, lambdas, spec.sim.mode)
        pt = invert_simulated_curve(points, epsilon)
        result = pt.result
        errs = {
            "capacity_err_low": pt.capacity_err_low,
            "capacity_err_high": pt.capacity_err_high,
            "trials_per_point": spec.sim.trials,
            "grid_points": len(lambdas),
        }

    payload = {
        "params": _params_dict(params),
        "epsilon": result.epsilon,
        "lambda_eps": result.lambda_eps,
        "capacity": result.capacity,
        "method": result.method,
        **errs,
        "seed": seed,
        "version": _version_payload(),
    }
    _emit(payload, args.out)
    return EXIT_OK


def _default_spec(figure_id: str, values: dict, params: NetworkParams) -> ExperimentSpec:
    sim = _sim_config(values, params)
    if figure_id == "fig1":
        spec = ExperimentSpec(
            figure_id="fig1", params=params, sim=replace(sim, trials=sim.trials),
            l_values=(2, 4), modes=("effective", "channel"),
        )
    elif figure_id == "fig2":
        spec = ExperimentSpec(
            figure_id="fig2", params=params, sim=sim,
            l_values=tuple(range(1, 9)), epsilons=(1e-1, 1e-2, 1e-3),
        )
    else:
        spec = ExperimentSpec(
            figure_id="fig3", params=params, sim=sim,
            l_values=(2, 3, 4),
            epsilons=tuple(np.geomspace(1e-5, 1e-1, 9)),
        )
    updates = {}
    for key, (attr, conv) in _SPEC_KEYS.items():
        if key in values and attr != "figure_id":
            updates[attr] = conv(values[key]) if isinstance(values[key], str) else values[key]
    if "modes" not in updates and values.get("mode"):
        updates["modes"] = (values["mode"],)
    return replace(spec, **updates) if updates else spec


def _cmd_figures(args) -> int:
    values = _merged_values(args)
    params = _network_params(values)
    spec = _default_spec(args.figure_id, values, params)
    out_path = args.out or spec.output or f"{args.figure_id}.csv"
    run_figure(spec, out_path)
    sys.stdout.write(f"wrote {out_path}\n")
    return EXIT_OK


def _validation_checks(values: dict):
    """The invariant smoke suite behind `zfcap validate`."""
    seed = int(values.get("seed", 0))
    trials = int(values.get("trials", 20_000))
    params = _network_params(values)
    consts = derive_constants(params)
    checks = []

    # sampler law vs closed-form CDF
    rng = np.random.default_rng(seed)
    draws = sample_g(rng, params, consts, size=100_000)
    ks = _stats.kstest(draws, lambda g: cdf_primary(g, params, consts))
    checks.append(("sampler_ks_primary", ks.statistic < 0.01,
                   f"KS={ks.statistic:.5f} (< 0.01)"))

    w_draws = sample_w(rng, params, size=100_000) - params.w_floor
    ks_w = _stats.kstest(w_draws, "expon")
    checks.append(("sampler_ks_link_gain", ks_w.statistic < 0.01,
                   f"KS={ks_w.statistic:.5f} (< 0.01)"))

    # aggregate-interference moments vs closed forms
    ok_campbell, detail = True, []
    for g in (0.1, 1.0, 10.0):
        cs = campbell_stats(params, g, 10_000, np.random.default_rng(seed + 1))
        mean_ref = consts.c3 * params.lam * g ** (1 - consts.delta)
        var_ref = consts.c4 * params.lam * g ** (2 - consts.delta)
        ok_mean = abs(cs.mean - mean_ref) <= 3 * cs.mean_se
        ok_var = abs(cs.variance - var_ref) <= 3 * cs.variance_se
        ok_campbell &= ok_mean and ok_var
        detail.append(f"g={g:g}: mean {'ok' if ok_mean else 'BAD'},"
                      f" var {'ok' if ok_var else 'BAD'}")
    checks.append(("campbell_moments", ok_campbell, "; ".join(detail)))

    # simulated outage inside the analytic sandwich
    cfg = SimConfig(
        mode="effective",
        region_radius=max(100.0 * params.d, min_region_radius(params)),
        trials=max(trials, 10_000),
        seed=seed,
        stream_count=int(values.get("stream_count", 4)),
    )
    est = estimate_outage(params, cfg)
    p_lo = outage_lower(params, consts)
    p_up, up_se = outage_upper(params, consts, 400_000, np.random.default_rng(seed))
    ok_sandwich = est.ci_high >= p_lo and est.ci_low <= p_up + 3 * up_se
    checks.append(("bound_sandwich", ok_sandwich,
                   f"sim CI [{est.ci_low:.3g}, {est.ci_high:.3g}] vs "
                   f"bounds [{p_lo:.3g}, {p_up:.3g}]"))

    # inverted-capacity slope close to 1/L on the analytic curve
    eps_grid = np.geomspace(1e-5, 1e-2, 7)
    curve = []
    for eps in eps_grid:
        res = solve_capacity(
            float(eps),
            lambda lam: outage_lower(replace(params, lam=lam), consts),
            0.01 / params.d**2,
        )
        curve.append((float(eps), res.capacity))
    slope = capacity_sensitivity(curve)
    ok_slope = abs(slope - 1.0 / params.L) <= 0.05 / params.L + 0.02
    checks.append(("capacity_slope", ok_slope,
                   f"slope={slope:.4f}, target 1/L={1 / params.L:.4f}"))
    return checks


def _cmd_validate(args) -> int:
    values = _merged_values(args)
    checks = _validation_checks(values)
    all_ok = True
    for name, ok, detail in checks:
        all_ok &= ok
        sys.stdout.write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}\n")
    if args.format == "json" and args.out:
        _emit(
            {
                "checks": [
                    {"name": n, "passed": bool(ok), "detail": d}
                    for n, ok, d in checks
                ],
                "version": _version_payload(),
            },
            args.out,
        )
    return EXIT_OK if all_ok else EXIT_VALIDATION


_COMMANDS = {
    "bounds": _cmd_bounds,
    "simulate": _cmd_simulate,
    "capacity": _cmd_capacity,
    "figures": _cmd_figures,
    "validate": _cmd_validate,
}


def run_cli(argv=None) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (IntegrationError, BracketError, NoCrossingError) as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
