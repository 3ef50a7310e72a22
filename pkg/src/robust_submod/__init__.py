"""Locally distributionally-robust multi-task subset selection.

A task family assigns each candidate subset a vector of task utilities;
the KL-robust value G softens the worst case toward a reference
distribution Q with strength lambda. This package provides the simplex
side (worst-case distributions, radii), greedy-family and
saturate-family solvers, an online time-robust driver, a LEO satellite
sensing simulation, facility-location image summarization, a
scikit-learn style selector, and a reproducible experiment CLI.
"""

from .errors import (ConfigError, ContractError, DomainError, FormatError,
                     IoError, NumericalError, RobustSubmodError)
from .bitset import full_mask, indices_of, mask_of, popcount
from .simplex import (SimplexDistribution, geometric_reference, kl_divergence,
                      local_worst_case, make_distribution, radius_for_lambda)
from .objective import (AggregateMode, TaskFamily, aggregate_oracle, link_g,
                        marginal_gain, normalize_task, robust_value,
                        shifted_min, surrogate_h, weighted_average,
                        worst_case, wsc_estimate)
from .solvers import (OnlineStepRecord, SaturationConfig, SolverResult,
                      brute_force, greedy, greedy_partial_cover, lazy_greedy,
                      moving_average, online_tr_driver, saturate_with_preference,
                      ssa, stochastic_greedy)
from .satsim import (FilterState, ScenarioConfig, SensingScenario, WalkerDelta,
                     fisher_utility, grid_cell_weights, lorenz_derivative,
                     nadir_cap_angular_radius, rk4_step, satellite_positions,
                     ukf_step, visibility)
from .imgsum import (cosine_similarities, distance_matrix, facility_tasks,
                     load_embeddings, save_embeddings, synthetic_embeddings)
from .estimators import FacilityLocationSelector
from .experiments import (ExperimentConfig, ExperimentRecord, ExperimentResult,
                          config_from_dict, default_config, evaluate_criteria,
                          load_config, read_csv, run_suite, write_csv)

__version__ = "0.1.0"

__all__ = [
    "AggregateMode", "ConfigError", "ContractError", "DomainError",
    "ExperimentConfig", "ExperimentRecord", "ExperimentResult",
    "FacilityLocationSelector", "FilterState", "FormatError", "IoError",
    "NumericalError", "OnlineStepRecord", "RobustSubmodError",
    "SaturationConfig", "ScenarioConfig", "SensingScenario",
    "SimplexDistribution", "SolverResult", "TaskFamily", "WalkerDelta",
    "aggregate_oracle", "brute_force", "config_from_dict",
    "cosine_similarities", "default_config", "distance_matrix",
    "evaluate_criteria", "facility_tasks", "fisher_utility", "full_mask",
    "geometric_reference", "greedy", "greedy_partial_cover",
    "grid_cell_weights", "indices_of", "kl_divergence", "lazy_greedy",
    "link_g", "load_config", "load_embeddings", "local_worst_case",
    "lorenz_derivative", "make_distribution", "marginal_gain", "mask_of", "moving_average",
    "nadir_cap_angular_radius", "normalize_task", "online_tr_driver",
    "popcount", "radius_for_lambda", "read_csv", "rk4_step", "robust_value",
    "run_suite", "satellite_positions", "saturate_with_preference",
    "save_embeddings", "shifted_min", "ssa", "stochastic_greedy",
    "surrogate_h", "synthetic_embeddings", "ukf_step", "visibility",
    "weighted_average", "worst_case", "write_csv", "wsc_estimate",
]
