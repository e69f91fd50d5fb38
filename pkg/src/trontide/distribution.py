"""Parity-symmetric input distributions, their norm moments, and attack
probability profiles.

Three input laws are provided (isotropic Gaussian, uniform on a sphere,
uniform in a ball); all are invariant under x -> -x and have finite norm
moments m1..m4. Attack profiles map each input to the probability that the
oracle corrupts its label; the beta-weighted moments b_k = E[beta(x)*||x||^k]
feed the convergence constants. Closed forms are used wherever they exist,
Monte Carlo (with standard errors) otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .mathcore import RngStream, log_gamma

__all__ = [
    "BallUniform",
    "BetaProfile",
    "ConstantBeta",
    "Gaussian",
    "InputDistribution",
    "MomentSet",
    "NormThresholdBeta",
    "beta_moments",
    "beta_of",
    "covariance",
    "covariance_monte_carlo",
    "moment_set",
    "moments_analytic",
    "moments_monte_carlo",
    "sample_batch",
    "sample_block",
    "support_radius",
]

_MC_CHUNK = 200_000


@dataclass(frozen=True)
class Gaussian:
    sigma: float
    n: int

    def __post_init__(self):
        if self.sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if self.n < 1:
            raise DomainError(f"dimension must be >= 1, got {self.n}")


@dataclass(frozen=True)
class SphereUniform:
    radius: float
    n: int

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError(f"radius must be > 0, got {self.radius}")
        if self.n < 1:
            raise DomainError(f"dimension must be >= 1, got {self.n}")


@dataclass(frozen=True)
class BallUniform:
    radius: float
    n: int

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError(f"radius must be > 0, got {self.radius}")
        if self.n < 1:
            raise DomainError(f"dimension must be >= 1, got {self.n}")


InputDistribution = Gaussian | SphereUniform | BallUniform


@dataclass(frozen=True)
class ConstantBeta:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise DomainError(f"beta must lie in [0, 1], got {self.value}")


@dataclass(frozen=True)
class NormThresholdBeta:
    """beta(x) = beta_hi when ||x|| > tau, beta_lo otherwise."""

    tau: float
    beta_lo: float
    beta_hi: float

    def __post_init__(self):
        if self.tau < 0:
            raise DomainError(f"tau must be >= 0, got {self.tau}")
        for name in ("beta_lo", "beta_hi"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")


BetaProfile = ConstantBeta | NormThresholdBeta


def beta_of(profile: BetaProfile, X) -> np.ndarray:
    """Attack probability at each input; X has trailing axis n."""
    X = np.asarray(X, dtype=np.float64)
    if isinstance(profile, ConstantBeta):
        return np.full(X.shape[:-1], profile.value)
    norms = np.sqrt(np.einsum("...n,...n->...", X, X))
    return np.where(norms > profile.tau, profile.beta_hi, profile.beta_lo)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_block(dist: InputDistribution, rng: RngStream, shape) -> np.ndarray:
    """i.i.d. draws with output shape ``shape + (n,)``.

    Per block the stream is consumed in a fixed order (normals first, then
    radius uniforms for the ball law), so fixed block shapes reproduce.
    """
    if isinstance(shape, int):
        shape = (shape,)
    shape = tuple(int(s) for s in shape)
    n = dist.n
    if isinstance(dist, Gaussian):
        return dist.sigma * rng.standard_normal(shape + (n,))
    g = rng.standard_normal(shape + (n,))
    norms = np.sqrt(np.einsum("...n,...n->...", g, g))
    u = g / norms[..., None]
    if isinstance(dist, SphereUniform):
        return dist.radius * u
    # ball: radius R * U^(1/n) puts uniform mass on the solid ball
    radii = dist.radius * rng.random(shape) ** (1.0 / n)
    return u * radii[..., None]


def sample_batch(dist: InputDistribution, rng: RngStream, b: int) -> np.ndarray:
    """b i.i.d. draws, shape (b, n)."""
    if b < 1:
        raise DomainError(f"batch size must be >= 1, got {b}")
    return sample_block(dist, rng, (b,))


def support_radius(dist: InputDistribution) -> float:
    """sup ||x|| over the support; inf for the Gaussian."""
    if isinstance(dist, Gaussian):
        return math.inf
    return dist.radius


def covariance(dist: InputDistribution) -> np.ndarray:
    """E[x x^T]; isotropic for every provided law."""
    n = dist.n
    if isinstance(dist, Gaussian):
        return dist.sigma ** 2 * np.eye(n)
    if isinstance(dist, SphereUniform):
        return dist.radius ** 2 / n * np.eye(n)
    return dist.radius ** 2 / (n + 2) * np.eye(n)


def covariance_monte_carlo(dist: InputDistribution, rng: RngStream,
                           n_samples: int = 10 ** 6) -> np.ndarray:
    """Empirical E[x x^T]; cross-check for the closed forms."""
    n = dist.n
    acc = np.zeros((n, n))
    done = 0
    while done < n_samples:
        m = min(_MC_CHUNK, n_samples - done)
        x = sample_block(dist, rng, (m,))
        acc += np.einsum("bi,bj->ij", x, x)
        done += m
    return acc / n_samples


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentSet:
    """Norm moments m_k = E||x||^k and beta-weighted moments b_k, k = 1..4.

    ``source`` records how the values were obtained; Monte Carlo results
    carry one standard error per entry (None for analytic values).
    """

    m1: float
    m2: float
    m3: float
    m4: float
    b1: float
    b2: float
    b3: float
    b4: float
    source: str = "analytic"
    n_samples: int | None = None
    se_m: tuple | None = None
    se_b: tuple | None = None

    def m(self, k: int) -> float:
        return (self.m1, self.m2, self.m3, self.m4)[k - 1]

    def b(self, k: int) -> float:
        return (self.b1, self.b2, self.b3, self.b4)[k - 1]


def _gaussian_moment(sigma: float, n: int, k: int) -> float:
    # even k: the gamma ratio telescopes to an exact product
    if k == 2:
        return sigma ** 2 * n
    if k == 4:
        return sigma ** 4 * n * (n + 2)
    return sigma ** k * 2.0 ** (k / 2.0) * math.exp(
        log_gamma((n + k) / 2.0) - log_gamma(n / 2.0))


def moments_analytic(dist: InputDistribution) -> tuple[float, float, float, float]:
    """Closed-form (m1, m2, m3, m4)."""
    if isinstance(dist, Gaussian):
        return tuple(_gaussian_moment(dist.sigma, dist.n, k) for k in range(1, 5))
    if isinstance(dist, SphereUniform):
        return tuple(dist.radius ** k for k in range(1, 5))
    # solid ball, by radial integration against density prop. to rho^(n-1)
    n = dist.n
    return tuple(dist.radius ** k * n / (n + k) for k in range(1, 5))


def _mc_weighted_norm_moments(dist, rng, n_samples, weight_fn=None):
    """Means and standard errors of w(x)*||x||^k for k = 1..4."""
    sums = np.zeros(4)
    sqsums = np.zeros(4)
    done = 0
    while done < n_samples:
        m = min(_MC_CHUNK, n_samples - done)
        x = sample_block(dist, rng, (m,))
        norms = np.sqrt(np.einsum("bn,bn->b", x, x))
        w = np.ones(m) if weight_fn is None else weight_fn(x)
        for k in range(1, 5):
            vals = w * norms ** k
            sums[k - 1] += vals.sum()
            sqsums[k - 1] += (vals * vals).sum()
        done += m
    means = sums / n_samples
    variances = np.maximum(sqsums / n_samples - means ** 2, 0.0)
    ses = np.sqrt(variances / n_samples)
    return tuple(means), tuple(ses)


def moments_monte_carlo(dist: InputDistribution, rng: RngStream,
                        n_samples: int = 10 ** 6) -> MomentSet:
    """Empirical m1..m4 with standard errors (b_k left at the m_k values
    scaled by beta = 1, i.e. an attack-everywhere profile)."""
    if n_samples < 10 ** 3:
        raise DomainError(f"need at least 1e3 samples, got {n_samples}")
    means, ses = _mc_weighted_norm_moments(dist, rng, n_samples)
    return MomentSet(*means, *means, source="monte_carlo",
                     n_samples=n_samples, se_m=ses, se_b=ses)


def beta_moments(dist: InputDistribution, profile: BetaProfile,
                 rng: RngStream | None = None, n_samples: int = 10 ** 6):
    """(b1, b2, b3, b4), with standard errors when Monte Carlo is used.

    A constant profile scales the analytic moments exactly; threshold
    profiles are estimated by Monte Carlo and require an RngStream.
    """
    if isinstance(profile, ConstantBeta):
        ms = moments_analytic(dist)
        return tuple(profile.value * m for m in ms), None
    if rng is None:
        raise DomainError("threshold beta profile requires an RngStream for Monte Carlo")
    means, ses = _mc_weighted_norm_moments(
        dist, rng, n_samples, weight_fn=lambda x: beta_of(profile, x))
    return means, ses


def moment_set(dist: InputDistribution, profile: BetaProfile,
               rng: RngStream | None = None, n_samples: int = 10 ** 6) -> MomentSet:
    """Full moment table for (distribution, attack profile)."""
    ms = moments_analytic(dist)
    bs, se_b = beta_moments(dist, profile, rng, n_samples)
    source = "analytic" if se_b is None else "analytic_m+mc_b"
    return MomentSet(*ms, *bs, source=source,
                     n_samples=None if se_b is None else n_samples,
                     se_m=None, se_b=se_b)
