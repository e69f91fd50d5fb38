"""Mini-batched non-gradient training loop and repeated-trial aggregation.

Each iteration samples a batch, asks the oracle for (possibly corrupted)
labels, forms the update direction M * mean((y_i - f_w(x_i)) * x_i) - note
that no activation derivative appears anywhere - and steps the filter.

``run`` produces a per-iteration trace for a single trial. ``run_trials``
advances R trials in lockstep through vectorized array code while giving
every trial its own random substreams; a single run is bit-identical to the
corresponding slice of a multi-trial run because streams are consumed in
per-trial blocks whose layout does not depend on the number of trials.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .adversary import AttackSpec, GradientOpposing, Oracle
from .distribution import InputDistribution, sample_block
from .errors import DivergenceError, DomainError, ShapeError
from .mathcore import RngStream, as_matrix, as_vector, ensure_finite
from .model import NetSpec, _forward_per_trial, forward_many
from .theory import CasePrediction, compute_constants, predict_attacked, predict_clean

__all__ = [
    "TrainConfig",
    "Trace",
    "TrialSummary",
    "delta1_bound",
    "make_oracle",
    "run",
    "run_trials",
    "tron_gradient",
]

_CHUNK = 256


# ---------------------------------------------------------------------------
# gradient
# ---------------------------------------------------------------------------

def tron_gradient(M, batch, net: NetSpec, w) -> np.ndarray:
    """Update direction M * ((1/b) * sum_i (y_i - f_w(x_i)) * x_i)."""
    batch = list(batch)
    if not batch:
        raise DomainError("batch must be non-empty")
    Mv = as_matrix(M, rows=net.r, cols=net.n, name="M")
    wv = as_vector(w, n=net.r, name="w")
    X = np.stack([as_vector(x, n=net.n, name="batch input") for x, _ in batch])
    Y = np.asarray([y for _, y in batch], dtype=np.float64)
    ensure_finite(Y, "batch labels")
    resid = Y - forward_many(net, wv, X)
    avg = np.einsum("bn,b->n", X, resid) / X.shape[0]
    return np.einsum("n,rn->r", avg, Mv)


def _tron_gradient_block(M, X, Y, net, W):
    """Per-trial gradients: X (R, b, n), Y (R, b), W (R, r) -> (R, r)."""
    resid = Y - _forward_per_trial(net, W, X)
    s = np.einsum("tbn,tb->tn", X, resid) / X.shape[1]
    return np.einsum("tn,rn->tr", s, M)


# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Training-run configuration.

    ``t_max`` is the index of the final iterate: the loop performs
    ``t_max - 1`` updates starting from iterate 1. The step size is either
    explicit (``eta``) or derived from the convergence theory (optionally
    pinning ``gamma``; at most one of the two may be given). ``eps`` and
    ``delta`` are the accuracy/confidence targets used for hit tracking and
    for the derived step size in the attacked regime.
    """

    b: int
    t_max: int
    seed: int
    eta: float | None = None
    gamma: float | None = None
    record_every: int | None = None
    eps: float = 0.05
    delta: float = 0.1
    early_stop: bool = False
    w_init: object = ("sphere", 1.0)   # "zero" | ("sphere", radius) | vector

    def __post_init__(self):
        if self.b < 1:
            raise DomainError(f"batch size must be >= 1, got {self.b}")
        if self.t_max < 1:
            raise DomainError(f"t_max must be >= 1, got {self.t_max}")
        if self.eta is not None and self.gamma is not None:
            raise DomainError("give an explicit eta or a gamma for the derived "
                              "step size, not both")
        if self.eta is not None and self.eta <= 0:
            raise DomainError(f"eta must be > 0, got {self.eta}")
        if self.record_every is not None and self.record_every < 1:
            raise DomainError(f"record_every must be >= 1, got {self.record_every}")

    @property
    def stride(self) -> int:
        if self.record_every is not None:
            return self.record_every
        return max(1, self.t_max // 1000)


@dataclass
class Trace:
    """Per-iteration record of a single training run.

    Row t carries the squared distance of iterate t to the bookkeeping
    target and the norm of the update direction computed at iterate t (nan
    on the final row, where no further update is formed).
    """

    t: np.ndarray
    dist_sq: np.ndarray
    grad_norm: np.ndarray
    final_w: np.ndarray
    eta: float
    queries: int
    attacks: int
    clamps: int
    wall_clock: float
    early_stopped: bool
    hit_iteration: int | None


@dataclass
class TrialSummary:
    """Aggregate of R independent trials of the same configuration."""

    trials: int
    eps: float
    delta: float
    horizon: int
    eta: float
    success_count: int
    final_dist_sq: np.ndarray
    hit_iterations: np.ndarray          # first iterate within eps; -1 if never
    diverged_trials: list
    queries: int
    attacks: int
    clamps: int
    final_ws: np.ndarray = field(repr=False)
    mean_trace_t: np.ndarray | None = None
    mean_trace_dist_sq: np.ndarray | None = None

    @property
    def success_fraction(self) -> float:
        return self.success_count / self.trials

    @property
    def mean_final_dist_sq(self) -> float:
        return float(self.final_dist_sq.mean())

    @property
    def se_final_dist_sq(self) -> float:
        if self.trials < 2:
            return 0.0
        return float(self.final_dist_sq.std(ddof=1) / math.sqrt(self.trials))

    @property
    def target_fraction(self) -> float:
        """1 - delta minus three binomial standard errors."""
        slack = 3.0 * math.sqrt(self.delta * (1.0 - self.delta) / self.trials)
        return 1.0 - self.delta - slack

    @property
    def meets_confidence_bound(self) -> bool:
        return self.success_fraction >= self.target_fraction

    def to_jsonable(self) -> dict:
        out = {
            "trials": self.trials,
            "eps": self.eps,
            "delta": self.delta,
            "horizon": self.horizon,
            "eta": self.eta,
            "success_count": self.success_count,
            "success_fraction": self.success_fraction,
            "target_fraction": self.target_fraction,
            "meets_confidence_bound": self.meets_confidence_bound,
            "mean_final_dist_sq": self.mean_final_dist_sq,
            "se_final_dist_sq": self.se_final_dist_sq,
            "final_dist_sq": [float(v) for v in self.final_dist_sq],
            "hit_iterations": [int(v) for v in self.hit_iterations],
            "diverged_trials": list(self.diverged_trials),
            "queries": self.queries,
            "attacks": self.attacks,
            "clamps": self.clamps,
        }
        return out


# ---------------------------------------------------------------------------
# stream layout and initialisation
# ---------------------------------------------------------------------------

def _trial_root(seed: int, trial: int) -> RngStream:
    return RngStream(seed).substream("trial", trial)


def make_oracle(net: NetSpec, w_star, attack: AttackSpec, seed: int,
                trials: int) -> Oracle:
    """Oracle over ``trials`` lanes with the canonical per-trial substreams."""
    coin, xi = [], []
    for i in range(trials):
        root = _trial_root(seed, i)
        coin.append(root.substream("oracle-coin"))
        xi.append(root.substream("oracle-xi"))
    return Oracle(net, w_star, attack, coin, xi)


def _init_filters(cfg: TrainConfig, r: int, trials: int) -> np.ndarray:
    spec = cfg.w_init
    W = np.empty((trials, r))
    if isinstance(spec, str):
        if spec != "zero":
            raise DomainError(f"unknown w_init spec {spec!r}")
        W[:] = 0.0
        return W
    if isinstance(spec, tuple) and len(spec) == 2 and spec[0] == "sphere":
        radius = float(spec[1])
        for i in range(trials):
            g = _trial_root(cfg.seed, i).substream("init").standard_normal(r)
            W[i] = radius * g / np.linalg.norm(g)
        return W
    v = as_vector(spec, n=r, name="w_init")
    W[:] = v
    return W


def delta1_bound(cfg: TrainConfig, w_star) -> float:
    """Deterministic upper bound on the initial squared distance, used by
    the derived step size and horizon predictions."""
    w = np.asarray(w_star, dtype=np.float64)
    spec = cfg.w_init
    if isinstance(spec, str) and spec == "zero":
        return float(w @ w)
    if isinstance(spec, tuple) and len(spec) == 2 and spec[0] == "sphere":
        return float((float(spec[1]) + np.linalg.norm(w)) ** 2)
    v = as_vector(spec, n=w.shape[0], name="w_init")
    return float((v - w) @ (v - w))


def _resolve_eta(net, w_star, dist, attack, M, cfg
                 ) -> tuple[float, CasePrediction | None]:
    if cfg.eta is not None:
        return cfg.eta, None
    consts = compute_constants(net, M, dist, attack.profile, cfg.b)
    d1 = delta1_bound(cfg, w_star)
    if attack.theta == 0.0:
        pred = predict_clean(consts, d1, cfg.eps, cfg.delta, gamma=cfg.gamma)
    else:
        pred = predict_attacked(consts, attack.theta, d1, cfg.eps, cfg.delta,
                                gamma=cfg.gamma)
    return pred.eta, pred


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

def _engine(net: NetSpec, w_star, dist: InputDistribution, attack: AttackSpec,
            M, cfg: TrainConfig, trials: int, *, oracle: Oracle | None = None,
            record_trace: bool = False, record_mean_trace: bool = False,
            allow_early_stop: bool = False):
    """Advance ``trials`` lockstep trials; see Trace/TrialSummary for outputs.

    ``w_star`` is the bookkeeping target for distances; the oracle (built
    from it by default, but injectable) is the only label source, so the
    update path never touches the target directly.
    """
    t_start = time.perf_counter()
    Mv = as_matrix(M, rows=net.r, cols=net.n, name="M")
    w_book = as_vector(w_star, n=net.r, name="w_star")
    if dist.n != net.n:
        raise ShapeError(f"distribution dimension {dist.n} != net input {net.n}")
    eta, prediction = _resolve_eta(net, w_book, dist, attack, Mv, cfg)
    if oracle is None:
        oracle = make_oracle(net, w_book, attack, cfg.seed, trials)
    elif oracle.trials != trials:
        raise ShapeError(f"oracle has {oracle.trials} lanes, engine needs {trials}")

    W = _init_filters(cfg, net.r, trials)
    if isinstance(attack.strategy, GradientOpposing):
        oracle.bind_learner(W, eta, Mv, _tron_gradient_block)

    data_streams = [_trial_root(cfg.seed, i).substream("data") for i in range(trials)]
    b, n = cfg.b, net.n
    chunk = max(1, min(_CHUNK, 2_000_000 // max(b * n, 1)))

    diff = W - w_book[None, :]
    dist_sq = np.einsum("tr,tr->t", diff, diff)
    guard = 1e12 * np.maximum(dist_sq, 1.0)
    active = np.ones(trials, dtype=bool)
    hit_iter = np.full(trials, -1, dtype=np.int64)
    eps_hit_sq = cfg.eps * cfg.eps
    hit_iter[dist_sq <= eps_hit_sq] = 1

    stride = cfg.stride
    rec_t, rec_dist, rec_grad = [], [], []
    mean_t, mean_dist = [], []

    def record(t, grad_norm_val):
        if record_trace:
            rec_t.append(t)
            rec_dist.append(float(dist_sq[0]))
            rec_grad.append(grad_norm_val)
        if record_mean_trace:
            mean_t.append(t)
            mean_dist.append(float(dist_sq.mean()))

    t = 1
    early_stopped = False
    updates_left = cfg.t_max - 1
    stop_sq = (cfg.eps / 2.0) ** 2
    block = np.empty((trials, chunk, b, n))
    while updates_left > 0 and not early_stopped:
        steps = min(chunk, updates_left)
        for i in range(trials):
            block[i, :steps] = sample_block(dist, data_streams[i], (steps, b))
        oracle.prefetch(steps, b)
        for s in range(steps):
            X = block[:, s]
            y, _ = oracle.reply(X)
            with np.errstate(invalid="ignore", over="ignore"):
                g = _tron_gradient_block(Mv, X, y, net, W)
            g[~active] = 0.0
            if (t - 1) % stride == 0:
                record(t, float(np.einsum("r,r->", g[0], g[0]) ** 0.5))
            W = W + eta * g
            t += 1
            diff = W - w_book[None, :]
            dist_sq = np.einsum("tr,tr->t", diff, diff)
            bad = active & ((dist_sq > guard) | ~np.isfinite(dist_sq))
            if bad.any():
                if record_trace:
                    raise DivergenceError(
                        f"distance blew past the guard at iterate {t} "
                        f"(eta={eta!r} likely infeasible)")
                active &= ~bad
            newly = (hit_iter < 0) & (dist_sq <= eps_hit_sq) & active
            hit_iter[newly] = t
            if allow_early_stop and cfg.early_stop and record_trace \
                    and dist_sq[0] <= stop_sq:
                early_stopped = True
                break
        updates_left -= steps
    # final row; the update direction at the final iterate is never formed,
    # and in-loop records only happen at iterates that do form one
    record(t, math.nan)

    wall = time.perf_counter() - t_start
    return {
        "W": W,
        "dist_sq": dist_sq,
        "hit_iter": hit_iter,
        "active": active,
        "eta": eta,
        "prediction": prediction,
        "oracle": oracle,
        "trace": (np.asarray(rec_t, dtype=np.int64),
                  np.asarray(rec_dist), np.asarray(rec_grad)),
        "mean_trace": (np.asarray(mean_t, dtype=np.int64), np.asarray(mean_dist)),
        "wall_clock": wall,
        "early_stopped": early_stopped,
        "t_final": t,
    }


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def run(net: NetSpec, w_star, dist: InputDistribution, attack: AttackSpec,
        M, cfg: TrainConfig, *, oracle: Oracle | None = None) -> Trace:
    """One training run; deterministic given (seed, cfg)."""
    res = _engine(net, w_star, dist, attack, M, cfg, trials=1, oracle=oracle,
                  record_trace=True, allow_early_stop=True)
    t_arr, d_arr, g_arr = res["trace"]
    hit = int(res["hit_iter"][0])
    orc = res["oracle"]
    return Trace(t=t_arr, dist_sq=d_arr, grad_norm=g_arr,
                 final_w=res["W"][0].copy(), eta=res["eta"],
                 queries=orc.queries, attacks=orc.attacks, clamps=orc.clamps,
                 wall_clock=res["wall_clock"],
                 early_stopped=res["early_stopped"],
                 hit_iteration=None if hit < 0 else hit)


def run_trials(net: NetSpec, w_star, dist: InputDistribution,
               attack: AttackSpec, M, cfg: TrainConfig, trials: int,
               eps: float, delta: float, *, oracle: Oracle | None = None,
               record_mean_trace: bool = False) -> TrialSummary:
    """R independent trials advanced in lockstep; success means the final
    iterate lies within eps of the bookkeeping target."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    res = _engine(net, w_star, dist, attack, M, cfg, trials=trials,
                  oracle=oracle, record_mean_trace=record_mean_trace)
    dist_sq = res["dist_sq"]
    success = int(np.sum(dist_sq <= eps * eps))
    diverged = [int(i) for i in np.nonzero(~res["active"])[0]]
    orc = res["oracle"]
    mt, md = res["mean_trace"]
    return TrialSummary(
        trials=trials, eps=eps, delta=delta, horizon=cfg.t_max,
        eta=res["eta"], success_count=success,
        final_dist_sq=dist_sq.copy(), hit_iterations=res["hit_iter"].copy(),
        diverged_trials=diverged, queries=orc.queries, attacks=orc.attacks,
        clamps=orc.clamps, final_ws=res["W"].copy(),
        mean_trace_t=mt if record_mean_trace else None,
        mean_trace_dist_sq=md if record_mean_trace else None)
