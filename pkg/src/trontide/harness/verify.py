"""Monte-Carlo verification suites.

Three families of checks, all reported as named entries with a measured
value, a bound, a slack (four MC standard errors, or a small deterministic
tolerance for exact identities), and the sample count:

* the half-linearization identity of the leaky ReLU under parity-symmetric
  inputs, E[sigma(a^T x) b^T x] = ((1+alpha)/2) E[(a^T x)(b^T x)];
* the per-step decomposition bounds behind the convergence recursion - the
  inner-product drift term and the two parts (same-sample and cross-sample)
  of the squared update-direction norm, each against its closed bound at a
  frozen iterate;
* the worst-case optimality demonstration: a consistent impostor filter
  with the exact per-query budget pulls training to itself, pinning the
  achievable accuracy from below.
"""

from __future__ import annotations

import math

import numpy as np

from ..adversary import (
    AttackSpec,
    ConsistentAlternative,
    ConstantPositive,
    GradientOpposing,
    SignedUniform,
    consistent_attack_budget,
)
from ..distribution import (
    ConstantBeta,
    InputDistribution,
    beta_of,
    sample_block,
)
from ..errors import DomainError, NumericError, TheoremPreconditionError
from ..mathcore import RngStream, as_matrix, as_vector
from ..model import NetSpec, forward_many, leaky_relu
from ..theory import (
    TheoryConstants,
    compute_constants,
    predict_clean,
    tradeoff_constant,
)
from ..trainer import TrainConfig, delta1_bound, make_oracle, run_trials

__all__ = [
    "demo_optimality",
    "report_all_pass",
    "verify_half_linearization",
    "verify_step_bounds",
]

_MC_CHUNK = 100_000


def _entry(measured: float, bound: float, slack: float, n: int) -> dict:
    return {
        "status": "pass" if measured <= bound + slack else "fail",
        "measured": float(measured),
        "bound": float(bound),
        "slack": float(slack),
        "N": int(n),
    }


def report_all_pass(report: dict) -> bool:
    return all(v["status"] == "pass" for v in report.values())


# ---------------------------------------------------------------------------
# half-linearization identity
# ---------------------------------------------------------------------------

def verify_half_linearization(dist: InputDistribution, leak_alpha: float,
                              rng: RngStream, n_samples: int,
                              pairs: int) -> dict:
    """For random direction pairs (a, b), estimate both sides of the
    identity on the same samples and test the difference against zero."""
    if n_samples < 10 ** 5:
        raise DomainError(f"need at least 1e5 samples, got {n_samples}")
    pair_rng = rng.substream("directions")
    data_rng = rng.substream("samples")
    n = dist.n
    dirs = [(pair_rng.standard_normal(n), pair_rng.standard_normal(n))
            for _ in range(pairs)]
    sums = np.zeros(pairs)
    sqsums = np.zeros(pairs)
    done = 0
    while done < n_samples:
        m = min(_MC_CHUNK, n_samples - done)
        x = sample_block(dist, data_rng, (m,))
        for i, (a, b) in enumerate(dirs):
            ax = x @ a
            bx = x @ b
            diff = leaky_relu(ax, leak_alpha) * bx - 0.5 * (1.0 + leak_alpha) * ax * bx
            sums[i] += diff.sum()
            sqsums[i] += (diff * diff).sum()
        done += m
    report = {}
    for i in range(pairs):
        mean = sums[i] / n_samples
        var = max(sqsums[i] / n_samples - mean ** 2, 0.0)
        se = math.sqrt(var / n_samples)
        slack = max(4.0 * se, 1e-12)
        report[f"half_linearization_pair_{i:02d}"] = _entry(abs(mean), 0.0,
                                                            slack, n_samples)
    return report


# ---------------------------------------------------------------------------
# per-step decomposition bounds
# ---------------------------------------------------------------------------

def _attack_xi(attack: AttackSpec, X, f_star, w_t, w_star, M, net, xi_rng):
    """Corruptions for a block of fresh batches at a frozen iterate."""
    th = attack.theta
    strat = attack.strategy
    if isinstance(strat, ConstantPositive):
        return np.full(f_star.shape, th)
    if isinstance(strat, SignedUniform):
        return xi_rng.uniform(-th, th, f_star.shape)
    if isinstance(strat, GradientOpposing):
        d = (w_t - w_star) @ M
        return th * np.sign(np.einsum("n,mbn->mb", d, X))
    f_adv = forward_many(net, strat.w_adv, X)
    return np.clip(f_adv - f_star, -th, th)


def verify_step_bounds(net: NetSpec, w_star, w_t, dist: InputDistribution,
                       attack: AttackSpec, M, b: int, rng: RngStream,
                       n_batches: int, consts: TheoryConstants | None = None,
                       label: str = "") -> dict:
    """Estimate the three pieces of the one-step distance expansion at a
    frozen iterate over fresh batches and compare each against its closed
    bound. All quantities are step-size-normalized (the step size scales
    both sides identically).
    """
    if consts is None:
        consts = compute_constants(net, M, dist, attack.profile, b)
    if not consts.lambda1_positive:
        raise TheoremPreconditionError("lambda1 > 0", f"lambda1={consts.lambda1!r}")
    Mv = as_matrix(M, rows=net.r, cols=net.n, name="M")
    w_sv = as_vector(w_star, n=net.r, name="w_star")
    w_tv = as_vector(w_t, n=net.r, name="frozen iterate")
    delta = w_tv - w_sv
    dist_sq = float(delta @ delta)
    dist_norm = math.sqrt(dist_sq)
    mset = consts.moments
    th = attack.theta
    c = math.sqrt(consts.c_sq)
    l2 = consts.lambda2

    bound_drift = (-(1.0 + net.leak_alpha) * consts.lambda1 * dist_sq
                   + 2.0 * th * l2 * mset.b1 * dist_norm)
    bound_self = (l2 ** 2 / b) * (consts.c_sq * mset.m4 * dist_sq
                                  + 2.0 * c * th * mset.b3 * dist_norm
                                  + th ** 2 * mset.b2)
    bound_cross = ((b * b - b) / (b * b)) * (
        th ** 2 * l2 ** 2 * mset.b1 ** 2
        + 2.0 * th * l2 ** 2 * mset.b1 * c * mset.m2 * dist_norm
        + l2 ** 2 * consts.c_sq * mset.m2 ** 2 * dist_sq)

    data_rng = rng.substream("data")
    coin_rng = rng.substream("coin")
    xi_rng = rng.substream("xi")
    sums = np.zeros(3)
    sqsums = np.zeros(3)
    done = 0
    # keep blocks near the MC chunk budget regardless of batch size
    block = max(1, _MC_CHUNK // b)
    while done < n_batches:
        m = min(block, n_batches - done)
        X = sample_block(dist, data_rng, (m, b))
        f_star = forward_many(net, w_sv, X)
        coins = coin_rng.random((m, b)) < beta_of(attack.profile, X)
        xi = _attack_xi(attack, X, f_star, w_tv, w_sv, Mv, net, xi_rng)
        y = f_star + coins * np.clip(xi, -th, th)
        resid = y - forward_many(net, w_tv, X)
        mx = np.einsum("mbn,rn->mbr", X, Mv)
        g = np.einsum("mbr,mb->mr", mx, resid) / b
        drift = 2.0 * (g @ delta)
        self_term = np.einsum("mbr,mbr->mb", mx, mx)
        self_term = (resid * resid * self_term).sum(axis=1) / (b * b)
        total = np.einsum("mr,mr->m", g, g)
        cross = total - self_term
        for i, vals in enumerate((drift, self_term, cross)):
            sums[i] += vals.sum()
            sqsums[i] += (vals * vals).sum()
        done += m
    report = {}
    names = ("drift_term", "batch_self_term", "batch_cross_term")
    bounds = (bound_drift, bound_self, bound_cross)
    suffix = f"@{label}" if label else ""
    for i, (name, bound) in enumerate(zip(names, bounds)):
        mean = sums[i] / n_batches
        var = max(sqsums[i] / n_batches - mean ** 2, 0.0)
        se = math.sqrt(var / n_batches)
        report[f"{name}{suffix}"] = _entry(mean, bound, max(4.0 * se, 1e-12),
                                           n_batches)
    return report


# ---------------------------------------------------------------------------
# worst-case optimality demonstration
# ---------------------------------------------------------------------------

def demo_optimality(net: NetSpec, w_star, w_adv, dist: InputDistribution,
                    M, b: int, eps: float, delta: float, trials: int,
                    seed: int) -> dict:
    """Attack every query with the consistent impostor filter at exactly the
    budget it needs; training then recovers the impostor, so the error
    against the true filter cannot beat their separation. The clean
    counterpart (no attack) recovering the true filter is reported alongside.
    """
    w_sv = as_vector(w_star, n=net.r, name="w_star")
    w_av = as_vector(w_adv, n=net.r, name="w_adv")
    zeta = consistent_attack_budget(net, w_av, w_sv, dist)
    separation = float(np.linalg.norm(w_av - w_sv))
    attack = AttackSpec(theta=zeta, profile=ConstantBeta(1.0),
                        strategy=ConsistentAlternative(w_av))
    consts = compute_constants(net, M, dist, ConstantBeta(1.0), b)
    # labels are exactly realizable for the impostor, so the clean-regime
    # step size and horizon apply with the impostor as the target
    cfg_probe = TrainConfig(b=b, t_max=2, seed=seed, eps=eps, delta=delta,
                            w_init="zero")
    d1_adv = delta1_bound(cfg_probe, w_av)
    pred = predict_clean(consts, d1_adv, eps, delta)
    cfg = TrainConfig(b=b, t_max=pred.horizon, seed=seed, eta=pred.eta,
                      eps=eps, delta=delta, w_init="zero")
    oracle = make_oracle(net, w_sv, attack, seed, trials)
    summary = run_trials(net, w_av, dist, attack, M, cfg, trials, eps, delta,
                         oracle=oracle)
    if oracle.clamps > 0:
        raise NumericError(
            f"consistent impostor exceeded its budget {oracle.clamps} times; "
            f"the computed budget {zeta!r} was insufficient")
    err_vs_star = np.linalg.norm(summary.final_ws - w_sv[None, :], axis=1)
    achieved = float(err_vs_star.mean())
    try:
        c_to = tradeoff_constant(consts)
    except Exception:
        c_to = math.nan
    eq1_eps_sq = (zeta * zeta / (delta * c_to)
                  if math.isfinite(c_to) and c_to > 0 else None)
    # clean counterpart: same trainer, no attack, converging to the truth
    clean_attack = AttackSpec(theta=0.0, profile=ConstantBeta(0.0),
                              strategy=ConstantPositive())
    d1_star = delta1_bound(cfg_probe, w_sv)
    pred_clean = predict_clean(consts, d1_star, eps, delta)
    cfg_clean = TrainConfig(b=b, t_max=pred_clean.horizon, seed=seed,
                            eta=pred_clean.eta, eps=eps, delta=delta,
                            w_init="zero")
    clean = run_trials(net, w_sv, dist, clean_attack, M, cfg_clean, trials,
                       eps, delta)
    sup_norm = float(dist.radius)
    return {
        "zeta": float(zeta),
        "separation": separation,
        "trials": trials,
        "eps": eps,
        "delta": delta,
        "horizon": pred.horizon,
        "adv_success_fraction": summary.success_fraction,
        "mean_dist_to_adv": float(np.sqrt(summary.final_dist_sq).mean()),
        "achieved_err_vs_star_mean": achieved,
        "achieved_err_vs_star_min": float(err_vs_star.min()),
        "achieved_err_vs_star_max": float(err_vs_star.max()),
        "lower_bound_err": separation,
        "lower_bound_confirmed": bool(achieved >= separation - eps),
        "c_tradeoff": None if not math.isfinite(c_to) else float(c_to),
        "eq1_implied_eps_sq": eq1_eps_sq,
        "optimality_ratio": (float(achieved ** 2 * c_to / (zeta * zeta))
                             if math.isfinite(c_to) and zeta > 0 else None),
        "slack_factor": (float(sup_norm ** 2 / c_to)
                         if math.isfinite(c_to) and c_to != 0 else None),
        "clamps": int(oracle.clamps),
        "clean_success_fraction": clean.success_fraction,
        "clean_mean_dist_to_star": float(np.sqrt(clean.final_dist_sq).mean()),
    }
