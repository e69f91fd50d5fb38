"""Parameter sweeps over {b, theta, beta, n, gamma} grids.

Each grid point re-resolves the base config with the axis overrides,
computes the theory constants and prediction, runs the trial plan at the
predicted horizon, and emits one CSV row. Infeasible points are emitted
with feasible=false instead of aborting the sweep.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import replace

import numpy as np

from ..errors import ConfigInfeasibleError, TrontideError
from ..theory import compute_constants, predict_attacked, predict_clean
from ..trainer import delta1_bound, run_trials
from .config import ExperimentConfig

__all__ = ["run_sweep", "sweep_csv"]

_CONST_COLS = [
    "feasible", "violated", "lambda1", "lambda2", "lambda3", "c_tradeoff",
    "theta_star", "eta", "gamma", "contraction", "T_predicted",
    "T_empirical_median", "success_fraction", "mean_final_dist_sq",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        if not math.isfinite(v):
            return ""
        return repr(v)
    return str(v).replace(",", ";")


def _point_row(base: ExperimentConfig, point: dict) -> dict:
    row = dict(point)
    try:
        cfg = base.with_overrides(**point)
        resolved = cfg.resolve()
        consts = compute_constants(resolved.net, resolved.M, resolved.dist,
                                   resolved.profile, resolved.train.b)
        d1 = delta1_bound(resolved.train, resolved.w_star)
        gamma = resolved.train.gamma
        if resolved.attack.theta == 0.0:
            pred = predict_clean(consts, d1, resolved.eps, resolved.delta, gamma)
            contraction = pred.kappa
        else:
            pred = predict_attacked(consts, resolved.attack.theta, d1,
                                    resolved.eps, resolved.delta, gamma)
            contraction = pred.alpha_rec
        train_cfg = resolved.train
        if train_cfg.t_max != pred.horizon:
            train_cfg = replace(train_cfg, t_max=pred.horizon)
        summary = run_trials(resolved.net, resolved.w_star, resolved.dist,
                             resolved.attack, resolved.M, train_cfg,
                             resolved.trials_r, resolved.eps, resolved.delta)
        hits = summary.hit_iterations.astype(np.float64)
        hits[hits < 0] = train_cfg.t_max + 1  # never-hit trials count as the cap
        row.update({
            "feasible": True, "violated": None,
            "lambda1": consts.lambda1, "lambda2": consts.lambda2,
            "lambda3": consts.lambda3, "c_tradeoff": pred.c_tradeoff,
            "theta_star": pred.theta_star, "eta": pred.eta,
            "gamma": pred.gamma, "contraction": contraction,
            "T_predicted": pred.horizon,
            "T_empirical_median": float(np.median(hits)),
            "success_fraction": summary.success_fraction,
            "mean_final_dist_sq": summary.mean_final_dist_sq,
        })
    except (ConfigInfeasibleError, TrontideError) as exc:
        constraint = getattr(exc, "constraint", None) or str(exc)
        row.update({col: None for col in _CONST_COLS})
        row["feasible"] = False
        row["violated"] = constraint
    return row


def run_sweep(base: ExperimentConfig) -> tuple[list[str], list[dict]]:
    """(column names, one row dict per grid point), deterministic order."""
    sweep = base.data.get("sweep")
    if not sweep:
        raise ConfigInfeasibleError("sweep section present",
                                    "config has no sweep.axes")
    axes = sweep["axes"]
    names = sorted(axes)
    rows = []
    for combo in itertools.product(*(axes[name] for name in names)):
        point = dict(zip(names, combo))
        rows.append(_point_row(base, point))
    return names + _CONST_COLS, rows


def sweep_csv(columns: list[str], rows: list[dict]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in columns))
    return "\n".join(lines) + "\n"
