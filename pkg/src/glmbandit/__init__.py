"""Generalized-linear contextual bandits with a Monte Carlo validation harness."""

from .__about__ import __version__
from .design import DesignState, min_eigenvalue, weighted_norm, weighted_norms
from .environment import Environment, sample_context_batch, second_moment_min_eig
from .errors import (
    GlmBanditError,
    InvalidConfigError,
    NonPositiveDefiniteError,
    NumericalError,
    SingularDesignError,
    SingularFisherError,
)
from .harness import (
    AggregateSummary,
    ExperimentResult,
    ExperimentSpec,
    RegretTrace,
    emit_csv,
    run_experiment,
    simulate,
    sweep,
)
from .links import IDENTITY, LOGISTIC, PROBIT, LinkFunction, compute_kappa, get_link, link_eval
from .mle import MleResult, mle_fit
from .policies import (
    ArmScores,
    EpsilonGreedyPolicy,
    OraclePolicy,
    PolicyConfig,
    SupCbGlmPolicy,
    UcbGlmPolicy,
    UniformRandomPolicy,
    alpha_from_rule,
    cb_glm_scores,
    make_policy,
)
from .validation import (
    CoverageReport,
    lemma4_event_coverage,
    probe_directions,
    proposition1_growth,
    run_ucb_glm_instrumented,
    theorem1_coverage,
    width_sum_check,
    znorm_bound_check,
)

__all__ = [
    "__version__",
    "AggregateSummary",
    "ArmScores",
    "CoverageReport",
    "DesignState",
    "Environment",
    "EpsilonGreedyPolicy",
    "ExperimentResult",
    "ExperimentSpec",
    "GlmBanditError",
    "IDENTITY",
    "InvalidConfigError",
    "LOGISTIC",
    "LinkFunction",
    "MleResult",
    "NonPositiveDefiniteError",
    "NumericalError",
    "OraclePolicy",
    "PROBIT",
    "PolicyConfig",
    "RegretTrace",
    "SingularDesignError",
    "SingularFisherError",
    "SupCbGlmPolicy",
    "UcbGlmPolicy",
    "UniformRandomPolicy",
    "alpha_from_rule",
    "cb_glm_scores",
    "compute_kappa",
    "emit_csv",
    "get_link",
    "lemma4_event_coverage",
    "link_eval",
    "make_policy",
    "min_eigenvalue",
    "mle_fit",
    "probe_directions",
    "proposition1_growth",
    "run_experiment",
    "run_ucb_glm_instrumented",
    "sample_context_batch",
    "second_moment_min_eig",
    "simulate",
    "sweep",
    "theorem1_coverage",
    "weighted_norm",
    "weighted_norms",
    "width_sum_check",
    "znorm_bound_check",
]
