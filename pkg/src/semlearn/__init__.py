"""Learning linear structural equation models by repeatedly removing the
vertex with the smallest precision diagonal."""

from .clime import clime_full, symmetrize_min, threshold, update_after_removal
from .errors import *  # noqa: F401,F403
from .finite import (
    BoundInputs,
    LearnerConfig,
    assumption2_check,
    c1_constant,
    c2_constant,
    error_bound,
    heuristic_lambda,
    lambda_guidance,
    learn_finite,
)
from .lp import LpProblem, solve_l1_linf
from .population import LearnResult, find_terminal, learn_population, misspecification_margin, schur_remove
from .precision import PrecisionEstimate
from .sem import (
    Dag,
    IdentifiabilityReport,
    KnownVarianceSpec,
    Sem,
    check_identifiability,
    constant_M,
    covariance_of,
    lemma1_counterexample,
    marginal_sem,
    precision_of,
    validate_dag,
)
from .synth import (
    DataMatrix,
    NoiseModel,
    empirical_covariance,
    gaussian_sample_covariance,
    random_dag,
    random_sem,
    sample_data,
)

__version__ = "0.1.0"
