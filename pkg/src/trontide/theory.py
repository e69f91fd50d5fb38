"""Convergence theory for the Tron-style non-gradient trainer.

Evaluates the spectral constants of a (net, sensing matrix, distribution,
attack profile) configuration, the step sizes and contraction rates of the
two training regimes (clean labels / budget-bounded label poisoning), the
a-priori iteration horizons, the attack-budget trade-off constant and its
Gaussian closed form, and the prediction-risk condition. A brute-force
recursion unroll is provided as the independent oracle for the attacked
horizon computation.

Naming used throughout:
  lambda1   smallest eigenvalue (symmetric part) of Abar * Sigma * M^T
  lambda2   sqrt of the largest eigenvalue of M^T M
  lambda3   mean over sensing members of lambda_max(A_i A_i^T)
  c_sq      (1 + alpha)^2 * lambda3
  m_k, b_k  plain and attack-weighted norm moments of the input law
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import (
    BetaProfile,
    InputDistribution,
    MomentSet,
    covariance,
    moment_set,
)
from .errors import ConfigInfeasibleError, DomainError, NumericError, TheoremPreconditionError
from .mathcore import RngStream, as_matrix, eig_extremes_symmetric, log_gamma
from .model import NetSpec

__all__ = [
    "CasePrediction",
    "RecursionParams",
    "TheoryConstants",
    "attack_budget_limit",
    "attacked_recursion_params",
    "compute_constants",
    "contraction_kappa",
    "gaussian_tradeoff_closed_form",
    "horizon_attacked",
    "horizon_clean",
    "predict_attacked",
    "predict_clean",
    "rate_constants",
    "recursion_claims",
    "recursion_unroll",
    "risk_condition",
    "step_size_clean",
    "tradeoff_constant",
]


@dataclass(frozen=True)
class TheoryConstants:
    lambda1: float
    lambda2: float
    lambda3: float
    c_sq: float
    moments: MomentSet
    leak_alpha: float
    batch_b: int

    @property
    def lambda1_positive(self) -> bool:
        return self.lambda1 > 0.0

    def require_lambda1(self) -> None:
        if not self.lambda1_positive:
            raise TheoremPreconditionError(
                "lambda1 > 0", f"lambda1={self.lambda1!r}")


@dataclass(frozen=True)
class RecursionParams:
    """Parameters of the one-step distance recursion
    D_{t+1} <= (1 - eta' b_star + eta'^2 c1) D_t + eta'^2 c2 + eta' c3."""

    delta1: float
    b_star: float
    c1: float
    c2: float
    c3: float
    eta_prime: float
    gamma: float
    eps_prime_sq: float


@dataclass(frozen=True)
class CasePrediction:
    case: str                       # "clean" or "attacked"
    eta: float
    gamma: float
    horizon: int
    c_tradeoff: float
    theta_star: float
    kappa: float | None = None
    alpha_rec: float | None = None
    beta_rec: float | None = None
    c_rate_proof: float | None = None
    c_rate_printed: float | None = None
    recursion: RecursionParams | None = None


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def compute_constants(net: NetSpec, M, dist: InputDistribution,
                      profile: BetaProfile, b: int,
                      rng: RngStream | None = None,
                      mc_samples: int = 10 ** 6) -> TheoryConstants:
    """Spectral constants and moment table for one configuration.

    Sigma is the closed-form input covariance. The positivity of lambda1 is
    recorded; operations that depend on it raise when it fails.
    """
    if b < 1:
        raise DomainError(f"batch size must be >= 1, got {b}")
    Mv = as_matrix(M, rows=net.r, cols=net.n, name="sensing matrix M")
    sigma = covariance(dist)
    response = net.sensing.mean @ sigma @ Mv.T
    lambda1 = eig_extremes_symmetric(response)[0]
    lambda2 = math.sqrt(max(eig_extremes_symmetric(Mv.T @ Mv)[1], 0.0))
    lambda3 = net.sensing.lambda3
    c_sq = (1.0 + net.leak_alpha) ** 2 * lambda3
    moments = moment_set(dist, profile, rng=rng, n_samples=mc_samples)
    return TheoryConstants(lambda1=float(lambda1), lambda2=float(lambda2),
                           lambda3=float(lambda3), c_sq=float(c_sq),
                           moments=moments, leak_alpha=net.leak_alpha,
                           batch_b=int(b))


def _batch_mix(consts: TheoryConstants) -> float:
    """m4/b + m2^2 (1 - 1/b): the clean-case variance mix."""
    m = consts.moments
    b = consts.batch_b
    return m.m4 / b + m.m2 ** 2 * (1.0 - 1.0 / b)


def tradeoff_constant(consts: TheoryConstants) -> float:
    """(1 + alpha) * lambda1 / (b1 * lambda2) - 1.

    Infinite when b1 = 0 (nothing is ever attacked); must be positive for
    any attacked-case prediction.
    """
    if consts.lambda2 <= 0.0:
        raise ConfigInfeasibleError("lambda2 > 0", f"lambda2={consts.lambda2!r}")
    b1 = consts.moments.b1
    if b1 == 0.0:
        return math.inf
    return (1.0 + consts.leak_alpha) * consts.lambda1 / (b1 * consts.lambda2) - 1.0


def gaussian_tradeoff_closed_form(sigma: float, beta: float, n: int) -> float:
    """Trade-off constant for an isotropic Gaussian input and a single
    identity-sensing ReLU unit under a constant attack probability:
    sigma / (sqrt(2) * beta) * Gamma(n/2) / Gamma((n+1)/2) - 1."""
    if sigma <= 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    ratio = math.exp(log_gamma(n / 2.0) - log_gamma((n + 1) / 2.0))
    return sigma / (math.sqrt(2.0) * beta) * ratio - 1.0


def attack_budget_limit(eps: float, delta: float, c_tradeoff: float) -> float:
    """Largest tolerable per-query corruption: sqrt(eps^2 * delta * c)."""
    if eps <= 0 or delta <= 0 or c_tradeoff <= 0:
        raise DomainError("eps, delta and the trade-off constant must be positive")
    return math.sqrt(eps * eps * delta * c_tradeoff)


# ---------------------------------------------------------------------------
# clean case (exactly realizable labels)
# ---------------------------------------------------------------------------

def clean_gamma_bound(consts: TheoryConstants) -> float:
    """gamma must exceed max(C, 1) with C = lambda1^2 / (lambda2^2 lambda3 mix)."""
    consts.require_lambda1()
    mix = _batch_mix(consts)
    denom = consts.lambda2 ** 2 * consts.lambda3 * mix
    if denom <= 0.0:
        raise ConfigInfeasibleError("lambda2^2 * lambda3 * moment mix > 0",
                                    f"value={denom!r}")
    return max(consts.lambda1 ** 2 / denom, 1.0)


def step_size_clean(consts: TheoryConstants, gamma: float | None = None
                    ) -> tuple[float, float, float]:
    """(eta, gamma, kappa) for the clean regime.

    eta = lambda1 / (gamma (1+alpha) lambda2^2 lambda3 mix) and the induced
    per-step contraction kappa = 1 - ((gamma-1)/gamma^2) * lambda1^2 /
    (lambda2^2 lambda3 mix) lies in (0, 1) whenever gamma clears its bound.
    """
    bound = clean_gamma_bound(consts)
    if gamma is None:
        gamma = 2.0 * bound
    if gamma <= bound:
        raise ConfigInfeasibleError(
            "gamma > max(C, 1)", f"gamma={gamma!r}, bound={bound!r}")
    mix = _batch_mix(consts)
    denom = consts.lambda2 ** 2 * consts.lambda3 * mix
    eta = consts.lambda1 / (gamma * (1.0 + consts.leak_alpha) * denom)
    kappa = 1.0 - (gamma - 1.0) / gamma ** 2 * consts.lambda1 ** 2 / denom
    if not 0.0 < kappa < 1.0:
        raise NumericError(f"contraction factor outside (0, 1): {kappa!r}")
    return float(eta), float(gamma), float(kappa)


def contraction_kappa(consts: TheoryConstants, eta: float) -> float:
    """Per-step contraction for an arbitrary step size:
    1 + eta^2 lambda2^2 c^2 mix - eta lambda1 (1 + alpha)."""
    mix = _batch_mix(consts)
    return (1.0 + eta ** 2 * consts.lambda2 ** 2 * consts.c_sq * mix
            - eta * consts.lambda1 * (1.0 + consts.leak_alpha))


def horizon_clean(delta1: float, eps: float, delta: float, kappa: float) -> int:
    """Smallest T with kappa^(T-1) * delta1 <= eps^2 * delta."""
    if not 0.0 < kappa < 1.0:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    if eps <= 0 or delta <= 0:
        raise DomainError("eps and delta must be positive")
    if delta1 < 0:
        raise DomainError(f"delta1 must be >= 0, got {delta1}")
    target = eps * eps * delta
    if target >= delta1:
        return 1
    t = 1 + math.ceil(math.log(target / delta1) / math.log(kappa) - 1e-12)
    t = max(int(t), 1)
    while t > 1 and kappa ** (t - 2) * delta1 <= target:
        t -= 1
    while kappa ** (t - 1) * delta1 > target:
        t += 1
    return t


# ---------------------------------------------------------------------------
# attacked case (bounded probabilistic label corruption)
# ---------------------------------------------------------------------------

def attacked_recursion_params(consts: TheoryConstants, theta: float,
                              delta1: float, eps: float, delta: float,
                              gamma: float | None = None) -> RecursionParams:
    """Recursion parameters for the attacked regime, with every feasibility
    constraint checked and named. theta = 0 degenerates to the clean
    contraction (c2 = c3 = 0)."""
    consts.require_lambda1()
    if theta < 0:
        raise DomainError(f"theta must be >= 0, got {theta}")
    if eps <= 0 or delta <= 0:
        raise DomainError("eps and delta must be positive")
    c_to = tradeoff_constant(consts)
    if c_to <= 0.0:
        raise ConfigInfeasibleError(
            "c_tradeoff > 0",
            f"c_tradeoff={c_to!r} (attack-weighted moment b1 too large "
            f"relative to lambda1)")
    eps_prime_sq = eps * eps * delta
    if eps_prime_sq >= delta1:
        raise ConfigInfeasibleError(
            "eps^2 * delta < delta1",
            f"eps^2*delta={eps_prime_sq!r}, delta1={delta1!r}")
    if math.isfinite(c_to):
        theta_cap = math.sqrt(eps_prime_sq * c_to)
        if theta > theta_cap * (1.0 + 1e-12):
            raise ConfigInfeasibleError(
                "theta <= theta_star",
                f"theta={theta!r}, theta_star={theta_cap!r}")
    m = consts.moments
    b = consts.batch_b
    off = 1.0 - 1.0 / b
    c1 = consts.c_sq * ((m.b1 * m.m2 + m.m2 ** 2) * off + (m.b3 + m.m4) / b)
    c2 = theta ** 2 * ((m.b1 ** 2 + m.b1 * m.m2) * off + (m.b2 + m.b3) / b)
    c3 = theta ** 2 * m.b1
    b_star = (consts.lambda1 * (1.0 + consts.leak_alpha) / consts.lambda2 - m.b1)
    if m.b1 > 0.0 and math.isfinite(c_to):
        alt = m.b1 * c_to
        if abs(b_star - alt) > 1e-12 * max(1.0, abs(b_star)):
            raise NumericError(
                f"b_star identity violated: {b_star!r} vs b1*c_tradeoff={alt!r}")
    if b_star <= 0.0:
        raise ConfigInfeasibleError("b_star > 0", f"b_star={b_star!r}")
    if c1 <= 0.0:
        raise ConfigInfeasibleError("c1 > 0", f"c1={c1!r}")
    margin = eps_prime_sq - c3 / b_star
    if margin <= 0.0:
        raise ConfigInfeasibleError(
            "eps^2 * delta > c3 / b_star (theta strictly below theta_star)",
            f"eps^2*delta={eps_prime_sq!r}, c3/b_star={c3 / b_star!r}")
    g_lo = max(b_star ** 2 / c1, (eps_prime_sq + c2 / c1) / margin, 1.0)
    if gamma is None:
        gamma = 2.0 * g_lo
    if gamma <= g_lo:
        raise ConfigInfeasibleError(
            "gamma > max(b_star^2/c1, (eps'^2 + c2/c1)/(eps'^2 - c3/b_star), 1)",
            f"gamma={gamma!r}, bound={g_lo!r}")
    eta_prime = b_star / (gamma * c1)
    return RecursionParams(delta1=float(delta1), b_star=float(b_star),
                           c1=float(c1), c2=float(c2), c3=float(c3),
                           eta_prime=float(eta_prime), gamma=float(gamma),
                           eps_prime_sq=float(eps_prime_sq))


def recursion_claims(params: RecursionParams) -> tuple[bool, bool, float, float]:
    """Coefficients of the unrolled recursion and the two feasibility flags:
    alpha_rec in (0, 1), and eps'^2 (1 - alpha_rec) - beta_rec > 0."""
    eta_p = params.b_star / (params.gamma * params.c1)
    alpha_rec = 1.0 - eta_p * params.b_star + eta_p ** 2 * params.c1
    beta_rec = eta_p ** 2 * params.c2 + eta_p * params.c3
    claim1 = 0.0 < alpha_rec < 1.0
    claim2 = params.eps_prime_sq * (1.0 - alpha_rec) - beta_rec > 0.0
    return claim1, claim2, float(alpha_rec), float(beta_rec)


def recursion_unroll(params: RecursionParams, t_max: int) -> np.ndarray:
    """Brute-force iteration of the distance recursion for t = 1..t_max.

    This is the independent oracle against which the closed-form horizon is
    checked; it must stay a plain loop.
    """
    if t_max < 1:
        raise DomainError(f"t_max must be >= 1, got {t_max}")
    _, _, alpha_rec, beta_rec = recursion_claims(params)
    out = np.empty(t_max)
    d = params.delta1
    out[0] = d
    for i in range(1, t_max):
        d = alpha_rec * d + beta_rec
        out[i] = d
    return out


def _recursion_value(params, alpha_rec, beta_rec, t: int) -> float:
    fix = beta_rec / (1.0 - alpha_rec)
    return alpha_rec ** (t - 1) * (params.delta1 - fix) + fix


def horizon_attacked(params: RecursionParams) -> int:
    """Smallest T with the unrolled recursion bound at or below eps'^2."""
    claim1, claim2, alpha_rec, beta_rec = recursion_claims(params)
    if not claim1:
        raise ConfigInfeasibleError(
            "recursion coefficient alpha_rec in (0, 1)",
            f"alpha_rec={alpha_rec!r} (gamma={params.gamma!r})")
    if not claim2:
        raise ConfigInfeasibleError(
            "eps'^2 (1 - alpha_rec) - beta_rec > 0",
            f"alpha_rec={alpha_rec!r}, beta_rec={beta_rec!r}, "
            f"eps'^2={params.eps_prime_sq!r}")
    if params.delta1 <= params.eps_prime_sq:
        return 1
    fix = beta_rec / (1.0 - alpha_rec)
    ratio = (params.eps_prime_sq - fix) / (params.delta1 - fix)
    t = 1 + math.ceil(math.log(ratio) / math.log(alpha_rec) - 1e-12)
    t = max(int(t), 1)
    while t > 1 and _recursion_value(params, alpha_rec, beta_rec, t - 1) <= params.eps_prime_sq:
        t -= 1
    while _recursion_value(params, alpha_rec, beta_rec, t) > params.eps_prime_sq:
        t += 1
    return t


def rate_constants(consts: TheoryConstants, gamma: float) -> tuple[float, float]:
    """Two versions of the attacked-case rate constant.

    The first drives the horizon actually predicted (derived from the
    recursion coefficients; the corruption budget cancels out of it). The
    second is the headline closed form, computed alongside for comparison;
    the two differ in how the moment mix enters.
    """
    if gamma <= 1.0:
        raise DomainError(f"gamma must be > 1, got {gamma}")
    c_to = tradeoff_constant(consts)
    m = consts.moments
    b = consts.batch_b
    off = 1.0 - 1.0 / b
    c1 = consts.c_sq * ((m.b1 * m.m2 + m.m2 ** 2) * off + (m.b3 + m.m4) / b)
    c2_over_th2 = (m.b1 ** 2 + m.b1 * m.m2) * off + (m.b2 + m.b3) / b
    gamma_over_cto = 0.0 if math.isinf(c_to) else gamma / c_to
    denom_proof = c2_over_th2 / c1 + gamma_over_cto
    proof = math.inf if denom_proof == 0.0 else (gamma - 1.0) / denom_proof
    denom_printed = (m.m2 + m.m3) / (consts.c_sq * (m.m3 + m.m4)) + gamma_over_cto
    printed = (gamma - 1.0) / denom_printed
    return float(proof), float(printed)


# ---------------------------------------------------------------------------
# full predictions
# ---------------------------------------------------------------------------

def _theta_star_or_inf(eps, delta, c_to):
    if not math.isfinite(c_to):
        return math.inf
    if c_to <= 0:
        return math.nan
    return attack_budget_limit(eps, delta, c_to)


def predict_clean(consts: TheoryConstants, delta1: float, eps: float,
                  delta: float, gamma: float | None = None) -> CasePrediction:
    eta, gamma_used, kappa = step_size_clean(consts, gamma)
    horizon = horizon_clean(delta1, eps, delta, kappa)
    c_to = tradeoff_constant(consts)
    return CasePrediction(case="clean", eta=eta, gamma=gamma_used,
                          horizon=horizon, c_tradeoff=c_to,
                          theta_star=_theta_star_or_inf(eps, delta, c_to),
                          kappa=kappa)


def predict_attacked(consts: TheoryConstants, theta: float, delta1: float,
                     eps: float, delta: float,
                     gamma: float | None = None) -> CasePrediction:
    params = attacked_recursion_params(consts, theta, delta1, eps, delta, gamma)
    _, _, alpha_rec, beta_rec = recursion_claims(params)
    horizon = horizon_attacked(params)
    eta = params.eta_prime / consts.lambda2
    c_to = tradeoff_constant(consts)
    proof, printed = rate_constants(consts, params.gamma)
    return CasePrediction(case="attacked", eta=float(eta), gamma=params.gamma,
                          horizon=horizon, c_tradeoff=c_to,
                          theta_star=_theta_star_or_inf(eps, delta, c_to),
                          alpha_rec=alpha_rec, beta_rec=beta_rec,
                          c_rate_proof=proof, c_rate_printed=printed,
                          recursion=params)


# ---------------------------------------------------------------------------
# risk of the learnt predictor
# ---------------------------------------------------------------------------

def risk_condition(consts: TheoryConstants, delta: float) -> tuple[float, bool]:
    """Whether the guaranteed filter accuracy translates into prediction
    risk below the squared attack budget: c^2 * m2 / (delta * c_tradeoff),
    satisfied when strictly below one."""
    if delta <= 0:
        raise DomainError(f"delta must be > 0, got {delta}")
    c_to = tradeoff_constant(consts)
    if c_to <= 0.0:
        raise ConfigInfeasibleError("c_tradeoff > 0", f"c_tradeoff={c_to!r}")
    lhs = 0.0 if math.isinf(c_to) else consts.c_sq * consts.moments.m2 / (delta * c_to)
    return float(lhs), bool(lhs < 1.0)
