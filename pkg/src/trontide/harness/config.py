"""Experiment configuration: a single JSON document, schema-validated with
unknown keys rejected, normalized (defaults materialized) so that
parse -> serialize -> parse is the identity, and resolvable into the
runtime objects every subcommand consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..adversary import (
    AttackSpec,
    ConsistentAlternative,
    ConstantPositive,
    GradientOpposing,
    SignedUniform,
)
from ..distribution import (
    BallUniform,
    ConstantBeta,
    Gaussian,
    NormThresholdBeta,
    SphereUniform,
)
from ..errors import SchemaError
from ..mathcore import RngStream
from ..model import (
    NetSpec,
    SensingFamily,
    build_symmetric_family,
    conv_family,
    sample_full_rank_matrix,
)
from ..theory import compute_constants, predict_attacked, predict_clean
from ..trainer import TrainConfig, delta1_bound

__all__ = ["ExperimentConfig", "ResolvedExperiment", "load_config", "parse_config"]

_STRATEGY_NAMES = ("const_pos", "signed_uniform", "grad_oppose")


def _require_mapping(v, path, required=(), optional=()):
    if not isinstance(v, dict):
        raise SchemaError(path, f"expected an object, got {type(v).__name__}")
    allowed = set(required) | set(optional)
    for key in v:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in v:
            raise SchemaError(f"{path}.{key}", "missing required key")
    return v


def _number(v, path, lo=None, hi=None, lo_open=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(path, f"expected a number, got {v!r}")
    x = float(v)
    if lo is not None and (x <= lo if lo_open else x < lo):
        raise SchemaError(path, f"value {x} below bound {lo}")
    if hi is not None and x > hi:
        raise SchemaError(path, f"value {x} above bound {hi}")
    return x


def _integer(v, path, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise SchemaError(path, f"value {v} below bound {lo}")
    return int(v)


def _vector(v, path):
    if not isinstance(v, list) or not v:
        raise SchemaError(path, "expected a non-empty array of numbers")
    return [_number(x, f"{path}[{i}]") for i, x in enumerate(v)]


def _matrix(v, path):
    if not isinstance(v, list) or not v:
        raise SchemaError(path, "expected a non-empty array of rows")
    rows = [_vector(row, f"{path}[{i}]") for i, row in enumerate(v)]
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise SchemaError(f"{path}[{i}]", f"row length {len(row)} != {width}")
    return rows


# ---------------------------------------------------------------------------
# section normalizers
# ---------------------------------------------------------------------------

def _norm_sensing(v, path):
    _require_mapping(v, path, required=("kind",),
                     optional=("matrices", "n", "offset", "half_width", "windows"))
    kind = v["kind"]
    if kind == "explicit":
        if "matrices" not in v:
            raise SchemaError(f"{path}.matrices", "missing required key")
        mats = v["matrices"]
        if not isinstance(mats, list) or not mats:
            raise SchemaError(f"{path}.matrices", "expected a non-empty array")
        return {"kind": "explicit",
                "matrices": [_matrix(m, f"{path}.matrices[{i}]")
                             for i, m in enumerate(mats)]}
    if kind == "identity":
        if "n" not in v:
            raise SchemaError(f"{path}.n", "missing required key")
        return {"kind": "identity", "n": _integer(v["n"], f"{path}.n", lo=1)}
    if kind == "symmetric_family":
        for key in ("offset", "half_width"):
            if key not in v:
                raise SchemaError(f"{path}.{key}", "missing required key")
        return {"kind": "symmetric_family",
                "offset": _matrix(v["offset"], f"{path}.offset"),
                "half_width": _integer(v["half_width"], f"{path}.half_width", lo=1)}
    if kind == "conv":
        for key in ("windows", "n"):
            if key not in v:
                raise SchemaError(f"{path}.{key}", "missing required key")
        wins = v["windows"]
        if not isinstance(wins, list) or not wins:
            raise SchemaError(f"{path}.windows", "expected a non-empty array")
        out = []
        for i, w in enumerate(wins):
            if not isinstance(w, list) or not w:
                raise SchemaError(f"{path}.windows[{i}]", "expected index array")
            out.append([_integer(c, f"{path}.windows[{i}][{j}]", lo=0)
                        for j, c in enumerate(w)])
        return {"kind": "conv", "windows": out,
                "n": _integer(v["n"], f"{path}.n", lo=1)}
    raise SchemaError(f"{path}.kind", f"unknown sensing kind {kind!r}")


def _norm_net(v, path):
    _require_mapping(v, path, required=("k", "leak_alpha", "sensing"))
    return {
        "k": _integer(v["k"], f"{path}.k", lo=1),
        "leak_alpha": _number(v["leak_alpha"], f"{path}.leak_alpha", lo=0.0, hi=1.0),
        "sensing": _norm_sensing(v["sensing"], f"{path}.sensing"),
    }


def _norm_m(v, path):
    if v == "identity":
        return "identity"
    _require_mapping(v, path, required=("kind",), optional=("dof", "matrix"))
    kind = v["kind"]
    if kind == "wishart":
        if "dof" not in v:
            raise SchemaError(f"{path}.dof", "missing required key")
        return {"kind": "wishart", "dof": _integer(v["dof"], f"{path}.dof", lo=1)}
    if kind == "explicit":
        if "matrix" not in v:
            raise SchemaError(f"{path}.matrix", "missing required key")
        return {"kind": "explicit", "matrix": _matrix(v["matrix"], f"{path}.matrix")}
    raise SchemaError(f"{path}.kind", f"unknown M kind {kind!r}")


def _norm_dist(v, path):
    _require_mapping(v, path, required=("kind",), optional=("sigma", "radius", "n"))
    kind = v.get("kind")
    if "n" not in v:
        raise SchemaError(f"{path}.n", "missing required key")
    n = _integer(v["n"], f"{path}.n", lo=1)
    if kind == "gaussian":
        if "sigma" not in v:
            raise SchemaError(f"{path}.sigma", "missing required key")
        return {"kind": "gaussian",
                "sigma": _number(v["sigma"], f"{path}.sigma", lo=0.0, lo_open=True),
                "n": n}
    if kind in ("sphere", "ball"):
        if "radius" not in v:
            raise SchemaError(f"{path}.radius", "missing required key")
        return {"kind": kind,
                "radius": _number(v["radius"], f"{path}.radius", lo=0.0, lo_open=True),
                "n": n}
    raise SchemaError(f"{path}.kind", f"unknown distribution kind {kind!r}")


def _norm_beta(v, path):
    _require_mapping(v, path, required=("kind",),
                     optional=("value", "tau", "beta_lo", "beta_hi"))
    kind = v.get("kind")
    if kind == "const":
        if "value" not in v:
            raise SchemaError(f"{path}.value", "missing required key")
        return {"kind": "const",
                "value": _number(v["value"], f"{path}.value", lo=0.0, hi=1.0)}
    if kind == "norm_threshold":
        for key in ("tau", "beta_lo", "beta_hi"):
            if key not in v:
                raise SchemaError(f"{path}.{key}", "missing required key")
        return {"kind": "norm_threshold",
                "tau": _number(v["tau"], f"{path}.tau", lo=0.0),
                "beta_lo": _number(v["beta_lo"], f"{path}.beta_lo", lo=0.0, hi=1.0),
                "beta_hi": _number(v["beta_hi"], f"{path}.beta_hi", lo=0.0, hi=1.0)}
    raise SchemaError(f"{path}.kind", f"unknown beta kind {kind!r}")


def _norm_strategy(v, path):
    if isinstance(v, str):
        if v not in _STRATEGY_NAMES:
            raise SchemaError(path, f"unknown strategy {v!r}")
        return v
    _require_mapping(v, path, required=("consistent",))
    inner = _require_mapping(v["consistent"], f"{path}.consistent", required=("w_adv",))
    return {"consistent": {"w_adv": _vector(inner["w_adv"], f"{path}.consistent.w_adv")}}


def _norm_attack(v, path):
    _require_mapping(v, path, required=("theta", "strategy"))
    return {"theta": _number(v["theta"], f"{path}.theta", lo=0.0),
            "strategy": _norm_strategy(v["strategy"], f"{path}.strategy")}


def _norm_w_spec(v, path, allow_zero):
    if isinstance(v, str):
        if allow_zero and v == "zero":
            return "zero"
        raise SchemaError(path, f"unknown filter spec {v!r}")
    if isinstance(v, list):
        return _vector(v, path)
    _require_mapping(v, path, required=("kind", "radius"))
    if v["kind"] != "sphere":
        raise SchemaError(f"{path}.kind", f"unknown filter spec kind {v['kind']!r}")
    return {"kind": "sphere",
            "radius": _number(v["radius"], f"{path}.radius", lo=0.0, lo_open=True)}


def _norm_train(v, path):
    _require_mapping(v, path, required=("b",),
                     optional=("eta", "gamma", "t_max", "record_every",
                               "early_stop", "w_init", "w_star"))
    out = {"b": _integer(v["b"], f"{path}.b", lo=1)}
    eta = v.get("eta")
    gamma = v.get("gamma")
    if eta is not None and gamma is not None:
        raise SchemaError(f"{path}.eta", "give eta or gamma, not both")
    out["eta"] = None if eta is None else _number(eta, f"{path}.eta", lo=0.0, lo_open=True)
    out["gamma"] = None if gamma is None else _number(gamma, f"{path}.gamma", lo=1.0, lo_open=True)
    t_max = v.get("t_max", "auto")
    if t_max != "auto":
        t_max = _integer(t_max, f"{path}.t_max", lo=1)
    out["t_max"] = t_max
    rec = v.get("record_every")
    out["record_every"] = None if rec is None else _integer(rec, f"{path}.record_every", lo=1)
    early = v.get("early_stop", False)
    if not isinstance(early, bool):
        raise SchemaError(f"{path}.early_stop", "expected a boolean")
    out["early_stop"] = early
    out["w_init"] = _norm_w_spec(v.get("w_init", "zero"), f"{path}.w_init", allow_zero=True)
    out["w_star"] = _norm_w_spec(v.get("w_star", {"kind": "sphere", "radius": 1.0}),
                                 f"{path}.w_star", allow_zero=False)
    return out


def _norm_trials(v, path):
    _require_mapping(v, path, required=(), optional=("R", "eps", "delta"))
    return {"R": _integer(v.get("R", 200), f"{path}.R", lo=1),
            "eps": _number(v.get("eps", 0.05), f"{path}.eps", lo=0.0, lo_open=True),
            "delta": _number(v.get("delta", 0.1), f"{path}.delta",
                             lo=0.0, hi=1.0, lo_open=True)}


def _norm_verify(v, path):
    _require_mapping(v, path, required=(),
                     optional=("n_samples", "pairs", "n_batches"))
    return {"n_samples": _integer(v.get("n_samples", 10 ** 6), f"{path}.n_samples", lo=10 ** 3),
            "pairs": _integer(v.get("pairs", 20), f"{path}.pairs", lo=1),
            "n_batches": _integer(v.get("n_batches", 10 ** 5), f"{path}.n_batches", lo=10 ** 3)}


_SWEEP_AXES = ("b", "theta", "beta", "n", "gamma")


def _norm_sweep(v, path):
    _require_mapping(v, path, required=("axes",))
    axes_in = v["axes"]
    if not isinstance(axes_in, dict) or not axes_in:
        raise SchemaError(f"{path}.axes", "expected a non-empty object")
    axes = {}
    size = 1
    for name, vals in axes_in.items():
        if name not in _SWEEP_AXES:
            raise SchemaError(f"{path}.axes.{name}",
                              f"unknown axis (allowed: {', '.join(_SWEEP_AXES)})")
        if not isinstance(vals, list) or not vals:
            raise SchemaError(f"{path}.axes.{name}", "expected a non-empty array")
        if name in ("b", "n"):
            axes[name] = [_integer(x, f"{path}.axes.{name}[{i}]", lo=1)
                          for i, x in enumerate(vals)]
        else:
            axes[name] = [_number(x, f"{path}.axes.{name}[{i}]")
                          for i, x in enumerate(vals)]
        size *= len(vals)
    if size > 10 ** 4:
        raise SchemaError(f"{path}.axes", f"grid size {size} exceeds 10^4")
    return {"axes": axes}


# ---------------------------------------------------------------------------
# config object
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResolvedExperiment:
    net: NetSpec
    M: np.ndarray
    dist: object
    profile: object
    attack: AttackSpec
    train: TrainConfig
    trials_r: int
    eps: float
    delta: float
    w_star: np.ndarray
    verify: dict
    sweep: dict | None


class ExperimentConfig:
    """Normalized experiment document; ``data`` is JSON-serializable."""

    def __init__(self, data: dict):
        self.data = data

    @property
    def seed(self) -> int:
        return self.data["seed"]

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2) + "\n"

    def with_overrides(self, **over) -> "ExperimentConfig":
        """New config with sweep-axis overrides applied."""
        d = json.loads(json.dumps(self.data))
        if "b" in over:
            d["train"]["b"] = int(over["b"])
        if "gamma" in over:
            d["train"]["gamma"] = float(over["gamma"])
            d["train"]["eta"] = None
        if "theta" in over:
            d["attack"]["theta"] = float(over["theta"])
        if "beta" in over:
            if d["beta"]["kind"] != "const":
                raise SchemaError("sweep.axes.beta",
                                  "beta axis requires a constant profile")
            d["beta"]["value"] = float(over["beta"])
        if "n" in over:
            n = int(over["n"])
            if d["net"]["sensing"]["kind"] != "identity" or d["M"] != "identity":
                raise SchemaError("sweep.axes.n",
                                  "n axis requires identity sensing and identity M")
            for spec_key in ("w_star", "w_init"):
                if isinstance(d["train"][spec_key], list):
                    raise SchemaError("sweep.axes.n",
                                      f"n axis incompatible with explicit {spec_key}")
            d["net"]["sensing"]["n"] = n
            d["dist"]["n"] = n
        return ExperimentConfig(d)

    def seeded(self, seed: int) -> "ExperimentConfig":
        d = json.loads(json.dumps(self.data))
        d["seed"] = int(seed)
        return ExperimentConfig(d)

    # -- resolution into runtime objects ------------------------------------

    def resolve(self) -> ResolvedExperiment:
        d = self.data
        root = RngStream(d["seed"])
        dist = self._build_dist(d["dist"])
        net, M = self._build_net_and_m(d["net"], d["M"], dist.n, root)
        profile = self._build_profile(d["beta"])
        w_star = self._build_w(d["train"]["w_star"], net.r, root.substream("w-star"))
        strategy = self._build_strategy(d["attack"]["strategy"], net.r)
        attack = AttackSpec(theta=d["attack"]["theta"], profile=profile,
                            strategy=strategy)
        trials = d["trials"]
        train = self._build_train(d["train"], net, M, dist, attack, w_star,
                                  trials["eps"], trials["delta"], d["seed"])
        return ResolvedExperiment(
            net=net, M=M, dist=dist, profile=profile, attack=attack,
            train=train, trials_r=trials["R"], eps=trials["eps"],
            delta=trials["delta"], w_star=w_star, verify=d["verify"],
            sweep=d.get("sweep"))

    @staticmethod
    def _build_dist(v):
        if v["kind"] == "gaussian":
            return Gaussian(sigma=v["sigma"], n=v["n"])
        if v["kind"] == "sphere":
            return SphereUniform(radius=v["radius"], n=v["n"])
        return BallUniform(radius=v["radius"], n=v["n"])

    @staticmethod
    def _build_profile(v):
        if v["kind"] == "const":
            return ConstantBeta(v["value"])
        return NormThresholdBeta(tau=v["tau"], beta_lo=v["beta_lo"],
                                 beta_hi=v["beta_hi"])

    def _build_net_and_m(self, net_v, m_v, dist_n, root):
        sens_v = net_v["sensing"]
        kind = sens_v["kind"]
        if kind == "explicit":
            fam = SensingFamily.from_matrices(
                [np.asarray(m, dtype=np.float64) for m in sens_v["matrices"]])
        elif kind == "identity":
            if net_v["k"] != 1:
                raise SchemaError("net.k", "identity sensing requires k = 1")
            fam = SensingFamily.from_matrices([np.eye(sens_v["n"])])
        elif kind == "conv":
            fam = conv_family(sens_v["windows"], sens_v["n"])
        else:
            fam = None  # symmetric family is built around M below
        if fam is not None:
            r, n = fam.r, fam.n
        else:
            off = np.asarray(sens_v["offset"], dtype=np.float64)
            r, n = off.shape
        if n != dist_n:
            raise SchemaError("dist.n", f"distribution n={dist_n} does not match "
                                        f"sensing input width {n}")
        M = self._build_m(m_v, r, n, root)
        if fam is None:
            off = np.asarray(sens_v["offset"], dtype=np.float64)
            fam = build_symmetric_family(M, off, sens_v["half_width"])
            if net_v["k"] != 2 * sens_v["half_width"]:
                raise SchemaError("net.k", "symmetric family requires k = 2 * half_width")
        net = NetSpec(k=net_v["k"], leak_alpha=net_v["leak_alpha"], sensing=fam)
        return net, M

    @staticmethod
    def _build_m(v, r, n, root):
        if v == "identity":
            if r != n:
                raise SchemaError("M", f"identity M requires r = n, got r={r}, n={n}")
            return np.eye(n)
        if v["kind"] == "wishart":
            return sample_full_rank_matrix(root.substream("M"), r, n, v["dof"])
        m = np.asarray(v["matrix"], dtype=np.float64)
        if m.shape != (r, n):
            raise SchemaError("M.matrix", f"expected shape {(r, n)}, got {m.shape}")
        return m

    @staticmethod
    def _build_w(v, r, rng):
        if isinstance(v, list):
            w = np.asarray(v, dtype=np.float64)
            if w.shape != (r,):
                raise SchemaError("train.w_star", f"expected length {r}, got {w.shape}")
            return w
        g = rng.standard_normal(r)
        return v["radius"] * g / np.linalg.norm(g)

    @staticmethod
    def _build_strategy(v, r):
        if v == "const_pos":
            return ConstantPositive()
        if v == "signed_uniform":
            return SignedUniform()
        if v == "grad_oppose":
            return GradientOpposing()
        w_adv = np.asarray(v["consistent"]["w_adv"], dtype=np.float64)
        if w_adv.shape != (r,):
            raise SchemaError("attack.strategy.consistent.w_adv",
                              f"expected length {r}, got {w_adv.shape}")
        return ConsistentAlternative(w_adv)

    @staticmethod
    def _build_train(v, net, M, dist, attack, w_star, eps, delta, seed):
        w_init = v["w_init"]
        if isinstance(w_init, dict):
            w_init = ("sphere", w_init["radius"])
        elif isinstance(w_init, list):
            w_init = np.asarray(w_init, dtype=np.float64)
        t_max = v["t_max"]
        if t_max == "auto":
            consts = compute_constants(net, M, dist, attack.profile, v["b"])
            probe = TrainConfig(b=v["b"], t_max=2, seed=seed, eta=v["eta"],
                                gamma=v["gamma"], eps=eps, delta=delta,
                                w_init=w_init)
            d1 = delta1_bound(probe, w_star)
            if attack.theta == 0.0:
                pred = predict_clean(consts, d1, eps, delta, gamma=v["gamma"])
            else:
                pred = predict_attacked(consts, attack.theta, d1, eps, delta,
                                        gamma=v["gamma"])
            t_max = pred.horizon
        return TrainConfig(b=v["b"], t_max=t_max, seed=seed, eta=v["eta"],
                           gamma=v["gamma"], record_every=v["record_every"],
                           eps=eps, delta=delta, early_stop=v["early_stop"],
                           w_init=w_init)


def parse_config(obj: dict) -> ExperimentConfig:
    """Validate and normalize a raw JSON document."""
    _require_mapping(obj, "config", required=("net", "dist"),
                     optional=("seed", "M", "beta", "attack", "train",
                               "trials", "verify", "sweep"))
    data = {
        "seed": _integer(obj.get("seed", 0), "config.seed", lo=0),
        "net": _norm_net(obj["net"], "config.net"),
        "M": _norm_m(obj.get("M", "identity"), "config.M"),
        "dist": _norm_dist(obj["dist"], "config.dist"),
        "beta": _norm_beta(obj.get("beta", {"kind": "const", "value": 0.0}),
                           "config.beta"),
        "attack": _norm_attack(obj.get("attack", {"theta": 0.0,
                                                  "strategy": "const_pos"}),
                               "config.attack"),
        "train": _norm_train(obj.get("train", {"b": 1}), "config.train"),
        "trials": _norm_trials(obj.get("trials", {}), "config.trials"),
        "verify": _norm_verify(obj.get("verify", {}), "config.verify"),
    }
    if "sweep" in obj:
        data["sweep"] = _norm_sweep(obj["sweep"], "config.sweep")
    return ExperimentConfig(data)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("config", f"invalid JSON: {exc}") from exc
    return parse_config(raw)
