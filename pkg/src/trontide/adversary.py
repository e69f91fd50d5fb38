"""Label-poisoning oracle: on each query x it returns the true network
output plus, with probability beta(x), an additive corruption bounded by
theta in absolute value.

The corruption strategies range from a fixed positive bump to a consistent
impostor that answers as if a different filter generated the data. A
strategy may know everything about the learner except its private state;
the gradient-opposing strategy therefore maintains its own replica of the
learner's filter, advanced with the learner's own update rule on the
labels the oracle itself issued.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import InputDistribution, BetaProfile, beta_of, support_radius
from .errors import DomainError, NumericError, ShapeError, UnsupportedDistributionError
from .mathcore import RngStream, as_vector, ensure_finite
from .model import NetSpec, leaky_relu

__all__ = [
    "AttackSpec",
    "ConsistentAlternative",
    "ConstantPositive",
    "GradientOpposing",
    "Oracle",
    "SignedUniform",
    "XiStrategy",
    "consistent_attack_budget",
]

# relative/absolute tolerance before an out-of-budget corruption counts as a clamp
_CLAMP_RTOL = 1e-9
_CLAMP_ATOL = 1e-12


@dataclass(frozen=True)
class ConstantPositive:
    """Always push the label up by the full budget theta."""


@dataclass(frozen=True)
class SignedUniform:
    """Corruption drawn uniformly from [-theta, theta]."""


@dataclass(frozen=True)
class GradientOpposing:
    """theta * sign((w_t - w*)^T M x), reconstructing w_t by replaying the
    learner's update rule on the observed data."""


@dataclass(frozen=True)
class ConsistentAlternative:
    """Answer as if the true filter were w_adv: xi = f_{w_adv}(x) - f_{w*}(x)."""

    w_adv: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w_adv", np.asarray(self.w_adv, dtype=np.float64))


XiStrategy = ConstantPositive | SignedUniform | GradientOpposing | ConsistentAlternative


@dataclass(frozen=True)
class AttackSpec:
    theta: float
    profile: BetaProfile
    strategy: XiStrategy

    def __post_init__(self):
        if self.theta < 0:
            raise DomainError(f"theta must be >= 0, got {self.theta}")


class Oracle:
    """Per-run oracle state over one or more parallel trials.

    The learner-facing surface is query/reply only; the true filter is
    private to the oracle. Bernoulli coins and uniform corruptions come
    from dedicated substreams so attack patterns reproduce independently
    of the data sampling.
    """

    def __init__(self, net: NetSpec, w_star, attack: AttackSpec,
                 coin_streams: list[RngStream], xi_streams: list[RngStream]):
        self.net = net
        self._w_star = as_vector(w_star, n=net.r, name="w_star")
        self.attack = attack
        self._coin_streams = list(coin_streams)
        self._xi_streams = list(xi_streams)
        if len(self._coin_streams) != len(self._xi_streams):
            raise ShapeError("coin and xi stream lists must have equal length")
        self.trials = len(self._coin_streams)
        # (k, n) view of the hidden filter through the sensing family
        self._vstar = np.einsum("krn,r->kn", net.sensing.stack, self._w_star)
        if isinstance(attack.strategy, ConsistentAlternative):
            w_adv = as_vector(attack.strategy.w_adv, n=net.r, name="w_adv")
            self._vadv = np.einsum("krn,r->kn", net.sensing.stack, w_adv)
        else:
            self._vadv = None
        # replay state for the gradient-opposing strategy
        self._replay_w = None
        self._replay_eta = None
        self._replay_M = None
        self._replay_grad = None
        # prefetched randomness
        self._coin_block = None
        self._xi_block = None
        self._cursor = 0
        # accounting
        self.queries = 0
        self.attacks = 0
        self.clamps = 0

    @staticmethod
    def single(net: NetSpec, w_star, attack: AttackSpec, rng: RngStream) -> "Oracle":
        """Single-trial oracle drawing its substreams from ``rng``."""
        return Oracle(net, w_star, attack,
                      [rng.substream("oracle-coin")], [rng.substream("oracle-xi")])

    # -- gradient-opposing replay -------------------------------------------

    def bind_learner(self, w_init: np.ndarray, eta: float, M: np.ndarray,
                     gradient_block_fn) -> None:
        """Give the oracle the learner's public recipe (start point, step
        size, sensing matrix, update rule) so it can replay the iterates."""
        w0 = np.asarray(w_init, dtype=np.float64)
        self._replay_w = w0.reshape(1, -1).copy() if w0.ndim == 1 else w0.copy()
        self._replay_eta = float(eta)
        self._replay_M = np.asarray(M, dtype=np.float64)
        self._replay_grad = gradient_block_fn

    @property
    def replay_w(self):
        return None if self._replay_w is None else self._replay_w.copy()

    # -- batched interface used by the trainer ------------------------------

    def prefetch(self, steps: int, b: int) -> None:
        """Draw the next ``steps`` x ``b`` coins (and corruptions where the
        strategy is random) for every trial, one block per substream."""
        coins = np.empty((self.trials, steps, b))
        for i, s in enumerate(self._coin_streams):
            coins[i] = s.random((steps, b))
        self._coin_block = coins
        if isinstance(self.attack.strategy, SignedUniform):
            xi = np.empty((self.trials, steps, b))
            th = self.attack.theta
            for i, s in enumerate(self._xi_streams):
                xi[i] = s.uniform(-th, th, (steps, b))
            self._xi_block = xi
        else:
            self._xi_block = None
        self._cursor = 0

    def _f_hidden(self, X: np.ndarray) -> np.ndarray:
        z = np.einsum("tbn,kn->tbk", X, self._vstar)
        return leaky_relu(z, self.net.leak_alpha).mean(axis=-1)

    def _raw_xi(self, X: np.ndarray, f_star: np.ndarray) -> np.ndarray:
        strat = self.attack.strategy
        th = self.attack.theta
        if isinstance(strat, ConstantPositive):
            return np.full(f_star.shape, th)
        if isinstance(strat, SignedUniform):
            if self._xi_block is None:
                raise NumericError("signed-uniform corruption used without prefetch")
            return self._xi_block[:, self._cursor]
        if isinstance(strat, GradientOpposing):
            if self._replay_w is None:
                raise NumericError(
                    "gradient-opposing strategy requires bind_learner before queries")
            d = self._replay_w - self._w_star[None, :]
            dm = np.einsum("tr,rn->tn", d, self._replay_M)
            return th * np.sign(np.einsum("tn,tbn->tb", dm, X))
        z = np.einsum("tbn,kn->tbk", X, self._vadv)
        f_adv = leaky_relu(z, self.net.leak_alpha).mean(axis=-1)
        return f_adv - f_star

    def reply(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Labels and attacked flags for one step of queries X (trials, b, n)."""
        if self._coin_block is None or self._cursor >= self._coin_block.shape[1]:
            raise NumericError("oracle reply without a prefetched coin block")
        th = self.attack.theta
        f_star = self._f_hidden(X)
        coins = self._coin_block[:, self._cursor]
        attacked = coins < beta_of(self.attack.profile, X)
        xi = self._raw_xi(X, f_star)
        over = np.abs(xi) > th * (1.0 + _CLAMP_RTOL) + _CLAMP_ATOL
        if over.any():
            self.clamps += int(over.sum())
        xi = np.clip(xi, -th, th)
        y = f_star + attacked * xi
        ensure_finite(y, "oracle labels")
        self._cursor += 1
        self.queries += int(attacked.size)
        self.attacks += int(attacked.sum())
        if isinstance(self.attack.strategy, GradientOpposing):
            g = self._replay_grad(self._replay_M, X, y, self.net, self._replay_w)
            self._replay_w = self._replay_w + self._replay_eta * g
        return y, attacked

    # -- one-query surface ---------------------------------------------------

    def query(self, x) -> tuple[float, bool]:
        """Single query against trial 0; coins/corruptions drawn directly."""
        xv = as_vector(x, n=self.net.n, name="query x")
        X = xv.reshape(1, 1, -1)
        th = self.attack.theta
        f_star = float(self._f_hidden(X)[0, 0])
        attacked = bool(self._coin_streams[0].random()
                        < float(beta_of(self.attack.profile, xv[None, :])[0]))
        strat = self.attack.strategy
        if isinstance(strat, SignedUniform):
            xi = float(self._xi_streams[0].uniform(-th, th))
        elif isinstance(strat, ConstantPositive):
            xi = th
        elif isinstance(strat, GradientOpposing):
            if self._replay_w is None:
                raise NumericError(
                    "gradient-opposing strategy requires bind_learner before queries")
            d = self._replay_w[0] - self._w_star
            xi = th * float(np.sign((d @ self._replay_M) @ xv))
        else:
            z = self._vadv @ xv
            xi = float(np.mean(leaky_relu(z, self.net.leak_alpha))) - f_star
        if abs(xi) > th * (1.0 + _CLAMP_RTOL) + _CLAMP_ATOL:
            self.clamps += 1
        xi = float(np.clip(xi, -th, th))
        y = f_star + (xi if attacked else 0.0)
        if not math.isfinite(y):
            raise NumericError("oracle produced a non-finite label")
        self.queries += 1
        self.attacks += int(attacked)
        return y, attacked


def consistent_attack_budget(net: NetSpec, w_adv, w_star,
                             dist: InputDistribution) -> float:
    """Smallest per-query budget that lets an impostor filter answer
    consistently: sup_x |f_{w_adv}(x) - f_{w_star}(x)| over the support.

    Exact for a single identity-sensing unit (radius * ||w_adv - w_star||);
    for general families a safe spectral bound is returned. Unbounded
    supports are rejected.
    """
    w_a = as_vector(w_adv, n=net.r, name="w_adv")
    w_s = as_vector(w_star, n=net.r, name="w_star")
    radius = support_radius(dist)
    if not math.isfinite(radius):
        raise UnsupportedDistributionError(
            "consistent attack budget needs a compactly supported distribution")
    gap = float(np.linalg.norm(w_a - w_s))
    fam = net.sensing
    if net.k == 1 and fam.r == fam.n and np.array_equal(fam.stack[0], np.eye(fam.n)):
        return radius * gap
    return (1.0 + net.leak_alpha) * radius * fam.max_row_gain * gap
