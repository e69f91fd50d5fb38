"""Command-line front end.

Subcommands: theory, train, trials, verify, optimality, sweep. Every
subcommand reads one JSON config (--config); --seed or the TRONTIDE_SEED
environment variable override the config seed. JSON outputs use stable key
order and map non-finite numbers to null; traces and sweeps are CSV.

Exit codes: 0 success, 1 infeasible or malformed config (the violated
constraint or schema path is named), 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from ..errors import (
    ConfigInfeasibleError,
    NumericError,
    SchemaError,
    TrontideError,
)
from ..theory import compute_constants, predict_attacked, predict_clean
from ..trainer import Trace, delta1_bound, run, run_trials
from .config import ExperimentConfig, load_config
from .sweep import run_sweep, sweep_csv
from .verify import (
    demo_optimality,
    report_all_pass,
    verify_half_linearization,
    verify_step_bounds,
)

__all__ = ["cli", "main"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def dump_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def trace_csv(trace: Trace) -> str:
    lines = ["t,dist_sq,grad_norm"]
    for t, d, g in zip(trace.t, trace.dist_sq, trace.grad_norm):
        lines.append(f"{int(t)},{float(d)!r},{float(g)!r}")
    return "\n".join(lines) + "\n"


def _write(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# subcommand payload builders
# ---------------------------------------------------------------------------

def theory_report(config: ExperimentConfig) -> dict:
    resolved = config.resolve()
    from ..mathcore import RngStream
    rng = RngStream(config.seed).substream("moments")
    consts = compute_constants(resolved.net, resolved.M, resolved.dist,
                               resolved.profile, resolved.train.b, rng=rng)
    m = consts.moments
    report = {
        "lambda1": consts.lambda1,
        "lambda2": consts.lambda2,
        "lambda3": consts.lambda3,
        "m1": m.m1, "m2": m.m2, "m3": m.m3, "m4": m.m4,
        "beta1": m.b1, "beta2": m.b2, "beta3": m.b3, "beta4": m.b4,
        "c_tradeoff": None, "theta_star": None,
        "eta": None, "gamma": None, "kappa": None,
        "alpha_rec": None, "beta_rec": None, "T_predicted": None,
        "crate_proof": None, "crate_printed": None,
        "feasible": False, "violated_constraints": [],
    }
    d1 = delta1_bound(resolved.train, resolved.w_star)
    theta = resolved.attack.theta
    gamma = resolved.train.gamma
    try:
        if theta == 0.0:
            pred = predict_clean(consts, d1, resolved.eps, resolved.delta, gamma)
        else:
            pred = predict_attacked(consts, theta, d1, resolved.eps,
                                    resolved.delta, gamma)
    except ConfigInfeasibleError as exc:
        report["violated_constraints"] = [exc.constraint]
        return report
    report.update({
        "c_tradeoff": pred.c_tradeoff, "theta_star": pred.theta_star,
        "eta": pred.eta, "gamma": pred.gamma, "kappa": pred.kappa,
        "alpha_rec": pred.alpha_rec, "beta_rec": pred.beta_rec,
        "T_predicted": pred.horizon, "crate_proof": pred.c_rate_proof,
        "crate_printed": pred.c_rate_printed, "feasible": True,
    })
    return report


def trials_report(config: ExperimentConfig, r_override: int | None) -> dict:
    resolved = config.resolve()
    trials = r_override if r_override is not None else resolved.trials_r
    summary = run_trials(resolved.net, resolved.w_star, resolved.dist,
                         resolved.attack, resolved.M, resolved.train,
                         trials, resolved.eps, resolved.delta)
    return summary.to_jsonable()


def verify_report(config: ExperimentConfig) -> dict:
    from ..mathcore import RngStream
    resolved = config.resolve()
    root = RngStream(config.seed)
    checks = {}
    checks.update(verify_half_linearization(
        resolved.dist, resolved.net.leak_alpha, root.substream("halflin"),
        resolved.verify["n_samples"], resolved.verify["pairs"]))
    # frozen iterates at the start, middle and end of one training run;
    # shorter reruns of the same seed reproduce the run's prefix exactly
    t_final = resolved.train.t_max
    iterates = sorted({1, max(1, t_final // 2), t_final})
    consts = compute_constants(resolved.net, resolved.M, resolved.dist,
                               resolved.profile, resolved.train.b,
                               rng=root.substream("moments"))
    for t_snap in iterates:
        cfg = replace(resolved.train, t_max=t_snap, record_every=max(1, t_snap))
        snap = run(resolved.net, resolved.w_star, resolved.dist,
                   resolved.attack, resolved.M, cfg)
        checks.update(verify_step_bounds(
            resolved.net, resolved.w_star, snap.final_w, resolved.dist,
            resolved.attack, resolved.M, resolved.train.b,
            root.substream("stepbounds", t_snap),
            resolved.verify["n_batches"], consts=consts, label=f"t={t_snap}"))
    return {"checks": checks, "all_pass": report_all_pass(checks)}


def optimality_report(config: ExperimentConfig) -> dict:
    resolved = config.resolve()
    strategy = resolved.attack.strategy
    from ..adversary import ConsistentAlternative
    if not isinstance(strategy, ConsistentAlternative):
        raise SchemaError("attack.strategy",
                          "optimality demo requires the consistent strategy "
                          "(it supplies w_adv)")
    return demo_optimality(resolved.net, resolved.w_star, strategy.w_adv,
                           resolved.dist, resolved.M, resolved.train.b,
                           resolved.eps, resolved.delta, resolved.trials_r,
                           config.seed)


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trontide",
        description="train leaky-ReLU filter nets against a label-poisoning "
                    "oracle and verify the convergence theory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_out in (("theory", False), ("train", True),
                            ("trials", False), ("verify", False),
                            ("optimality", False), ("sweep", True)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", required=needs_out, default=None,
                       help="output path (stdout for JSON reports if omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        if name == "trials":
            p.add_argument("-R", type=int, default=None, dest="trials",
                           help="override the trial count")
    return parser


def _effective_config(args) -> ExperimentConfig:
    config = load_config(args.config)
    seed = args.seed
    if seed is None and "TRONTIDE_SEED" in os.environ:
        try:
            seed = int(os.environ["TRONTIDE_SEED"])
        except ValueError as exc:
            raise SchemaError("TRONTIDE_SEED", f"not an integer: {exc}") from exc
    if seed is not None:
        config = config.seeded(seed)
    return config


def cli(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _effective_config(args)
        if args.command == "theory":
            report = theory_report(config)
            _write(dump_json(report), args.out)
            return 0 if report["feasible"] else 1
        if args.command == "train":
            resolved = config.resolve()
            trace = run(resolved.net, resolved.w_star, resolved.dist,
                        resolved.attack, resolved.M, resolved.train)
            _write(trace_csv(trace), args.out)
            return 0
        if args.command == "trials":
            _write(dump_json(trials_report(config, args.trials)), args.out)
            return 0
        if args.command == "verify":
            report = verify_report(config)
            _write(dump_json(report), args.out)
            return 0 if report["all_pass"] else 1
        if args.command == "optimality":
            _write(dump_json(optimality_report(config)), args.out)
            return 0
        columns, rows = run_sweep(config)
        _write(sweep_csv(columns, rows), args.out)
        return 0
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ConfigInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2
    except TrontideError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:  # console entry point
    sys.exit(cli())
