"""Regret statistics of softmax-UCB bandits.

A Monte Carlo engine for the exact episode process, a saddle-point (instanton)
solver for the rate function and dominant trajectories of the regret
distribution, and an exact treatment of the two-arm one-step system, behind a
CSV-emitting command line front end.
"""

from .core import (
    BanditSpec,
    PolicyEval,
    evaluate_policy,
    policy_probabilities,
    softmax,
    softmax_jacobian,
    ucb_index,
    ucb_partials,
)
from .instanton import (
    RateCurve,
    SaddleField,
    action_value,
    backward_pass,
    convex_piece_count,
    detect_kinks,
    fixed_point_step,
    forward_pass,
    most_probable_regret,
    newton_refine,
    rate_curve,
    residual,
    solve_saddle,
    update_r_hat,
)
from .mcsim import (
    ConditionedStats,
    RegretHistogram,
    Trajectory,
    conditioned_trajectory_stats,
    empirical_action,
    run_ensemble,
    run_episode,
    substream,
)
from .toy import (
    ToyBranch,
    ToySpec,
    branch_action,
    critical_regret,
    find_branches,
    g_of_delta_s,
)

__version__ = "0.1.0"

__all__ = [
    "BanditSpec", "PolicyEval", "evaluate_policy", "policy_probabilities",
    "softmax", "softmax_jacobian", "ucb_index", "ucb_partials",
    "RateCurve", "SaddleField", "action_value", "backward_pass",
    "convex_piece_count", "detect_kinks", "fixed_point_step", "forward_pass",
    "most_probable_regret", "newton_refine", "rate_curve", "residual",
    "solve_saddle", "update_r_hat",
    "ConditionedStats", "RegretHistogram", "Trajectory",
    "conditioned_trajectory_stats", "empirical_action", "run_ensemble",
    "run_episode", "substream",
    "ToyBranch", "ToySpec", "branch_action", "critical_regret",
    "find_branches", "g_of_delta_s",
    "__version__",
]
