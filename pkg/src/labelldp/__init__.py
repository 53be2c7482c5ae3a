"""Stochastic convex optimization under local label privacy.

Four label randomizers (three subset/response mechanisms with exact
enumeration oracles, one vector randomizer), their unbiased gradient
estimators with closed-form second-moment bounds, a projected-SGD trainer
that touches each label exactly once, and the linear hard instance whose
excess risk is available in closed form.
"""

from .errors import EnumerationGuardError, ParameterError
from .rng import (
    PURPOSE_DATA,
    PURPOSE_EVAL,
    PURPOSE_RANDOMIZE,
    PURPOSE_SHUFFLE,
    PURPOSE_TRAIN,
    RandomnessStream,
)
from .mechanisms import (
    BERNOULLI_SUBSET,
    D_SUBSET,
    DJW,
    KRR,
    MIN_EPSILON,
    SUBSET_MECHANISMS,
    MechanismParams,
    SanitizedSubset,
    bernoulli_inclusion_probabilities,
    bernoulli_subset_likelihood,
    bernoulli_subset_randomize,
    d_subset_gamma,
    d_subset_likelihood,
    d_subset_randomize,
    d_subset_zeta,
    default_subset_size,
    krr_likelihood,
    krr_randomize,
    verify_ldp_ratio,
)
from .vector_mechanism import (
    debias_scale,
    djw_vector_randomize,
    randomize_coordinates,
    second_moment_constant,
)
from .estimators import (
    MomentReport,
    PerLabelGradients,
    d_subset_gradient_estimate,
    estimator_moments_bruteforce,
    krr_gradient_estimate,
    krr_inversion_coefficients,
    second_moment_bound,
    subset_gradient_estimate,
)
from .sgd import (
    Dataset,
    DataPoint,
    GradientNormSummary,
    LossSpec,
    NON_PRIVATE,
    ParameterDomain,
    RiskEstimate,
    SgdState,
    TrainResult,
    excess_risk_bound,
    excess_risk_montecarlo,
    learning_rate,
    load_datapoints,
    project_ball,
    train,
)
from .hard_instance import (
    HardInstance,
    LabelDistribution,
    closed_form_excess_risk,
    hard_gamma,
    linear_loss,
    make_hard_instance,
    make_hard_theta,
    reduce_to_theta_hat,
)
from .config import ExperimentConfig, load_config
from .runners import (
    CSV_COLUMNS,
    ResultRow,
    run_reduce_demo,
    run_sweep,
    run_trial,
    run_verify_estimators,
    run_verify_privacy,
)

__version__ = "0.1.0"

__all__ = [
    "BERNOULLI_SUBSET",
    "CSV_COLUMNS",
    "D_SUBSET",
    "DJW",
    "DataPoint",
    "Dataset",
    "EnumerationGuardError",
    "ExperimentConfig",
    "GradientNormSummary",
    "HardInstance",
    "KRR",
    "LabelDistribution",
    "LossSpec",
    "MIN_EPSILON",
    "MechanismParams",
    "MomentReport",
    "NON_PRIVATE",
    "ParameterDomain",
    "ParameterError",
    "PerLabelGradients",
    "PURPOSE_DATA",
    "PURPOSE_EVAL",
    "PURPOSE_RANDOMIZE",
    "PURPOSE_SHUFFLE",
    "PURPOSE_TRAIN",
    "RandomnessStream",
    "ResultRow",
    "RiskEstimate",
    "SUBSET_MECHANISMS",
    "SanitizedSubset",
    "SgdState",
    "TrainResult",
    "bernoulli_inclusion_probabilities",
    "bernoulli_subset_likelihood",
    "bernoulli_subset_randomize",
    "closed_form_excess_risk",
    "d_subset_gamma",
    "d_subset_gradient_estimate",
    "d_subset_likelihood",
    "d_subset_randomize",
    "d_subset_zeta",
    "debias_scale",
    "default_subset_size",
    "djw_vector_randomize",
    "estimator_moments_bruteforce",
    "excess_risk_bound",
    "excess_risk_montecarlo",
    "hard_gamma",
    "krr_gradient_estimate",
    "krr_inversion_coefficients",
    "krr_likelihood",
    "krr_randomize",
    "learning_rate",
    "linear_loss",
    "load_config",
    "load_datapoints",
    "make_hard_instance",
    "make_hard_theta",
    "project_ball",
    "randomize_coordinates",
    "reduce_to_theta_hat",
    "run_reduce_demo",
    "run_sweep",
    "run_trial",
    "run_verify_estimators",
    "run_verify_privacy",
    "second_moment_bound",
    "second_moment_constant",
    "subset_gradient_estimate",
    "train",
    "verify_ldp_ratio",
]
