"""Lipschitz bandits: regret lower bounds, the directed-exploration policy and
transfer of the Lipschitz constant across episodes."""
from .core import (
    ArmEmbedding,
    BanditInstance,
    bernoulli_kl,
    bernoulli_kl_array,
    is_member,
    tightest_lipschitz,
)
from .oracle_lp import (
    ExplorationAllocation,
    LowerBoundSolution,
    LPStatus,
    confusing_parameter,
    constraint_matrix,
    continuity_delta,
    feasibility_margins,
    in_feasible_set,
    scale_free_bound,
    solve_lower_bound,
)
from .policy import Phase, PolicyConfig, PolicyState, select_arm, update
from .sim import Environment, EpisodeResult, OraclePolicy, generate_instance, pseudo_regret, run_episode
from .transfer import (
    EpisodeSummary,
    EstimatorConfig,
    LearnabilityProfile,
    adversarial_pair,
    audit_assumptions,
    concentration_bound,
    max_estimator,
    online_estimator,
    prefix_max,
    quantile_estimator,
    required_M,
    required_tau,
)

__version__ = "0.1.0"
