"""Structured stochastic bandits with dual-certified exploration.

Library layout:
  core        reward grids, reward matrices, empirical estimation
  structures  convex structure classes and their cones
  solver      small dense interior-point solver with exponential-cone support
  infodual    information distances, dual objective, sufficient-information test
  lowerbound  regret lower-bound programs and closed forms
  policies    the dual-certified policy plus KL-UCB / UCB1 / OSSB-style baselines
  harness     instance generators, experiment runner, validation suites
  cli         command-line entry points
"""

from .core import (
    RewardSupport,
    RewardMatrix,
    DusaObservationLog,
    mean_reward,
    best_arm_and_value,
    gap,
    pseudo_regret,
)
from .infodual import (
    RateVector,
    DualVars,
    info_distance,
    bernoulli_kl,
    kl_chain_decomposition,
    dual_value,
    dual_test,
)
from .structures import (
    StructureSpec,
    classify_arms,
    feasible_for_spec,
    project_l1,
)
from .lowerbound import (
    lower_bound_dual,
    lower_bound_separable,
    lower_bound_lipschitz_lp,
    concentration_bound,
)
from .policies import (
    PolicyDecision,
    DusaState,
    dusa_init,
    dusa_step,
    sufficient_info_test,
    shallow_update,
    deep_update,
    klucb_step,
    ucb1_step,
    ossb_lipschitz_step,
)

__all__ = [
    "RewardSupport",
    "RewardMatrix",
    "DusaObservationLog",
    "mean_reward",
    "best_arm_and_value",
    "gap",
    "pseudo_regret",
    "RateVector",
    "DualVars",
    "info_distance",
    "bernoulli_kl",
    "kl_chain_decomposition",
    "dual_value",
    "dual_test",
    "StructureSpec",
    "classify_arms",
    "feasible_for_spec",
    "project_l1",
    "lower_bound_dual",
    "lower_bound_separable",
    "lower_bound_lipschitz_lp",
    "concentration_bound",
    "PolicyDecision",
    "DusaState",
    "dusa_init",
    "dusa_step",
    "sufficient_info_test",
    "shallow_update",
    "deep_update",
    "klucb_step",
    "ucb1_step",
    "ossb_lipschitz_step",
]

__version__ = "0.1.0"
