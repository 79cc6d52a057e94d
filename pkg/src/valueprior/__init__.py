"""Imitation-learning policy estimation with a value-based prior."""

from valueprior.baselines import (
    build_augmented_mdp,
    dirichlet_estimate,
    extract_policy_and_transitions,
    lift_dataset,
    mle_estimate,
)
from valueprior.estimator import (
    CountTensor,
    EstimationResult,
    EstimatorConfig,
    alternating_maximize,
    count_tensor,
    forward_multipliers,
    kkt_residuals,
    log_posterior,
    solve_timestep,
    state_simplex_solve,
)
from valueprior.kernels import BACKEND
from valueprior.maze import MazeSpec, PerturbSpec, blind_maze, generate_maze, rms_error
from valueprior.mdp import (
    FiniteHorizonMdp,
    MdpValidationError,
    optimal_policy,
    policy_value,
    sample_trajectories,
    validate_mdp,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CountTensor",
    "EstimationResult",
    "EstimatorConfig",
    "FiniteHorizonMdp",
    "MazeSpec",
    "MdpValidationError",
    "PerturbSpec",
    "alternating_maximize",
    "blind_maze",
    "build_augmented_mdp",
    "count_tensor",
    "dirichlet_estimate",
    "extract_policy_and_transitions",
    "forward_multipliers",
    "generate_maze",
    "kkt_residuals",
    "lift_dataset",
    "log_posterior",
    "mle_estimate",
    "optimal_policy",
    "policy_value",
    "rms_error",
    "sample_trajectories",
    "solve_timestep",
    "state_simplex_solve",
    "validate_mdp",
]
