"""Single-filter depth-2 networks: mean-pooled leaky-ReLU responses of a
shared filter seen through a family of fixed sensing matrices.

A network evaluates x -> (1/k) * sum_i sigma(w^T A_i x) with sigma the
alpha-leaky ReLU. The sensing family caches its mean matrix and the mean of
the per-member top eigenvalues of A_i A_i^T, which the convergence theory
consumes repeatedly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, ShapeError
from .mathcore import RngStream, as_matrix, as_vector, eig_extremes_symmetric, ensure_finite

__all__ = [
    "NetSpec",
    "SensingFamily",
    "build_symmetric_family",
    "conv_family",
    "forward",
    "forward_many",
    "leaky_relu",
    "pointwise_sq_diff_bound",
    "sample_full_rank_matrix",
    "single_relu_net",
]


def leaky_relu(y, leak_alpha: float):
    """y for y >= 0, leak_alpha * y otherwise. Works on scalars and arrays."""
    if not 0.0 <= leak_alpha <= 1.0:
        raise DomainError(f"leak_alpha must lie in [0, 1], got {leak_alpha}")
    arr = np.asarray(y, dtype=np.float64)
    out = np.where(arr >= 0.0, arr, leak_alpha * arr)
    return float(out) if np.isscalar(y) or arr.ndim == 0 else out


@dataclass(frozen=True)
class SensingFamily:
    """k sensing matrices of common shape (r, n) with cached aggregates."""

    stack: np.ndarray          # (k, r, n)
    mean: np.ndarray           # (r, n), exact mean (may be supplied)
    lambda3: float             # (1/k) * sum_i lambda_max(A_i A_i^T)
    max_row_gain: float        # max_i sqrt(lambda_max(A_i A_i^T))

    @property
    def k(self) -> int:
        return self.stack.shape[0]

    @property
    def r(self) -> int:
        return self.stack.shape[1]

    @property
    def n(self) -> int:
        return self.stack.shape[2]

    @staticmethod
    def from_matrices(matrices, mean=None) -> "SensingFamily":
        mats = [as_matrix(a, name=f"sensing matrix {i}") for i, a in enumerate(matrices)]
        if not mats:
            raise ShapeError("sensing family must contain at least one matrix")
        r, n = mats[0].shape
        for i, a in enumerate(mats):
            if a.shape != (r, n):
                raise ShapeError(
                    f"sensing matrix {i} has shape {a.shape}, expected {(r, n)}")
        stack = np.stack(mats)
        if mean is None:
            mean = stack.mean(axis=0)
        else:
            mean = as_matrix(mean, rows=r, cols=n, name="sensing mean")
        tops = [eig_extremes_symmetric(a @ a.T)[1] for a in mats]
        lambda3 = float(np.mean(tops))
        max_gain = float(np.sqrt(max(max(tops), 0.0)))
        return SensingFamily(stack=stack, mean=mean, lambda3=lambda3,
                             max_row_gain=max_gain)


@dataclass(frozen=True)
class NetSpec:
    """Hypothesis-class instance: width k, leak alpha, and the sensing family.

    Filter weights range over all of R^r; there is no projection step.
    """

    k: int
    leak_alpha: float
    sensing: SensingFamily

    def __post_init__(self):
        if self.k != self.sensing.k:
            raise ShapeError(
                f"width k={self.k} does not match sensing family size {self.sensing.k}")
        if not 0.0 <= self.leak_alpha <= 1.0:
            raise DomainError(f"leak_alpha must lie in [0, 1], got {self.leak_alpha}")

    @property
    def r(self) -> int:
        return self.sensing.r

    @property
    def n(self) -> int:
        return self.sensing.n


def single_relu_net(n: int, leak_alpha: float = 0.0) -> NetSpec:
    """Width-1 net with identity sensing: x -> sigma(w^T x)."""
    fam = SensingFamily.from_matrices([np.eye(n)])
    return NetSpec(k=1, leak_alpha=leak_alpha, sensing=fam)


def _filter_view(net: NetSpec, w: np.ndarray) -> np.ndarray:
    """(k, n) array of per-member input-space filters A_i^T w."""
    return np.einsum("krn,r->kn", net.sensing.stack, w)


def forward(net: NetSpec, w, x) -> float:
    """Network response (1/k) * sum_i sigma(w^T A_i x) at a single input."""
    wv = as_vector(w, n=net.r, name="filter w")
    xv = as_vector(x, n=net.n, name="input x")
    z = _filter_view(net, wv) @ xv
    return float(np.mean(leaky_relu(z, net.leak_alpha)))


def forward_many(net: NetSpec, w, X) -> np.ndarray:
    """Network response at a batch of inputs X with trailing axis n."""
    wv = as_vector(w, n=net.r, name="filter w")
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != net.n:
        raise ShapeError(f"inputs must have trailing dimension {net.n}, got {X.shape}")
    z = np.einsum("...n,kn->...k", X, _filter_view(net, wv))
    return leaky_relu(z, net.leak_alpha).mean(axis=-1)


def _forward_per_trial(net: NetSpec, W: np.ndarray, X: np.ndarray) -> np.ndarray:
    """(R, b) responses for per-trial filters W (R, r) at inputs X (R, b, n)."""
    V = np.einsum("krn,tr->tkn", net.sensing.stack, W)
    z = np.einsum("tbn,tkn->tbk", X, V)
    return leaky_relu(z, net.leak_alpha).mean(axis=-1)


def build_symmetric_family(M, C, half_width: int) -> SensingFamily:
    """Family {M - j*C, M + j*C : j = 1..half_width}; its mean is exactly M."""
    Mv = as_matrix(M, name="center M")
    Cv = as_matrix(C, rows=Mv.shape[0], cols=Mv.shape[1], name="offset C")
    if half_width < 1:
        raise DomainError(f"half_width must be >= 1, got {half_width}")
    members = [Mv - j * Cv for j in range(half_width, 0, -1)]
    members += [Mv + j * Cv for j in range(1, half_width + 1)]
    # pass the exact center as the mean: pairwise float cancellation is not exact
    return SensingFamily.from_matrices(members, mean=Mv)


def conv_family(windows, n: int) -> SensingFamily:
    """Selector-matrix family: member i reads the input coordinates in
    windows[i]. Each row has exactly one 1; columns within a member are
    used at most once.
    """
    mats = []
    for i, win in enumerate(windows):
        idx = list(win)
        if not idx:
            raise ShapeError(f"window {i} is empty")
        if len(set(idx)) != len(idx):
            raise ShapeError(f"window {i} repeats a column index")
        a = np.zeros((len(idx), n))
        for row, col in enumerate(idx):
            if not 0 <= col < n:
                raise ShapeError(f"window {i} index {col} outside [0, {n})")
            a[row, col] = 1.0
        mats.append(a)
    return SensingFamily.from_matrices(mats)


def sample_full_rank_matrix(rng: RngStream, r: int, n: int, dof: int) -> np.ndarray:
    """Random (r, n) matrix of full row rank: the left r-by-r block is a sum
    of dof standard-normal outer products (almost surely positive definite),
    the remaining columns are fresh standard normal entries. Full rank is
    verified via the smallest singular value before returning.
    """
    if not 1 <= r <= n:
        raise DomainError(f"need 1 <= r <= n, got r={r}, n={n}")
    if dof < r:
        raise DomainError(f"degrees of freedom must be >= r, got {dof} < {r}")
    for _ in range(5):
        g = rng.standard_normal((dof, r))
        G = np.einsum("ki,kj->ij", g, g)
        if n > r:
            rest = rng.standard_normal((r, n - r))
            M = np.concatenate([G, rest], axis=1)
        else:
            M = G
        smin = float(np.linalg.svd(M, compute_uv=False)[-1])
        if smin > 1e-8:
            return M
    raise NumericError("failed to draw a full-rank matrix after 5 resamples")


def pointwise_sq_diff_bound(net: NetSpec, w1, w2, x) -> tuple[float, float]:
    """Squared response gap at x and its spectral upper bound.

    Returns (lhs, rhs) with
      lhs = (f_{w1}(x) - f_{w2}(x))^2
      rhs = (1 + alpha)^2 * lambda3 * ||w1 - w2||^2 * ||x||^2
    and lhs <= rhs + 1e-9 always.
    """
    w1v = as_vector(w1, n=net.r, name="w1")
    w2v = as_vector(w2, n=net.r, name="w2")
    xv = as_vector(x, n=net.n, name="x")
    diff = forward(net, w1v, xv) - forward(net, w2v, xv)
    lhs = diff * diff
    dw = w1v - w2v
    rhs = ((1.0 + net.leak_alpha) ** 2 * net.sensing.lambda3
           * float(dw @ dw) * float(xv @ xv))
    ensure_finite(np.array([lhs, rhs]), "pointwise bound")
    return float(lhs), float(rhs)
