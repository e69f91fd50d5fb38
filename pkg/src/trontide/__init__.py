"""trontide: a simulation and verification lab for training single-filter
depth-2 leaky-ReLU networks against a bounded label-poisoning oracle.

The package computes every constant of the accompanying convergence
analysis (spectral constants, step sizes, contraction factors, horizons,
the attack/accuracy/confidence trade-off), runs the mini-batched
non-gradient trainer against configurable adversaries, and ships Monte
Carlo suites that check the analysis' inequalities at desk scale.
"""

from .adversary import (
    AttackSpec,
    ConsistentAlternative,
    ConstantPositive,
    GradientOpposing,
    Oracle,
    SignedUniform,
    consistent_attack_budget,
)
from .distribution import (
    BallUniform,
    ConstantBeta,
    Gaussian,
    MomentSet,
    NormThresholdBeta,
    SphereUniform,
    beta_moments,
    moment_set,
    moments_analytic,
    moments_monte_carlo,
    sample_batch,
)
from .errors import (
    ConfigInfeasibleError,
    DivergenceError,
    DomainError,
    NumericError,
    SchemaError,
    ShapeError,
    TheoremPreconditionError,
    TrontideError,
    UnsupportedDistributionError,
)
from .mathcore import (
    RngStream,
    eig_extremes_symmetric,
    log_gamma,
    sample_std_gaussian_vector,
)
from .model import (
    NetSpec,
    SensingFamily,
    build_symmetric_family,
    conv_family,
    forward,
    forward_many,
    leaky_relu,
    pointwise_sq_diff_bound,
    sample_full_rank_matrix,
    single_relu_net,
)
from .theory import (
    CasePrediction,
    RecursionParams,
    TheoryConstants,
    attack_budget_limit,
    attacked_recursion_params,
    compute_constants,
    contraction_kappa,
    gaussian_tradeoff_closed_form,
    horizon_attacked,
    horizon_clean,
    predict_attacked,
    predict_clean,
    rate_constants,
    recursion_claims,
    recursion_unroll,
    risk_condition,
    step_size_clean,
    tradeoff_constant,
)
from .trainer import (
    Trace,
    TrainConfig,
    TrialSummary,
    delta1_bound,
    make_oracle,
    run,
    run_trials,
    tron_gradient,
)

__version__ = "0.1.0"
