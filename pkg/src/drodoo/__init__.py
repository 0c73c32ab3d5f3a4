"""Distributionally robust and optimistic optimization with smooth
divergence penalties.

The library solves penalized reweighting problems over empirical samples —
robust (penalty strength delta > 0, adversarial reweighting) and optimistic
(delta < 0, cooperative reweighting) — together with the first-order
asymptotics of the solution family: bias direction, sandwich covariance,
worst-case sensitivity, and the out-of-sample-optimal penalty strength.
The ``drodoo`` CLI reproduces the order-quantity Monte-Carlo experiments.
"""

from .asymptotics import (
    ExpansionSummary,
    OptimalDelta,
    RhoEstimate,
    SandwichCovariance,
    bias_direction,
    optimal_delta,
    rho_estimate,
    sandwich_covariance,
)
from .divergence import PhiDivergence, as_distribution, divergence_value, modified_chi2
from .errors import (
    ConfigError,
    InnerUnboundedError,
    NonConcaveError,
    SolverError,
    UnsupportedModelError,
    ValidationError,
)
from .experiments import (
    AveragedFrontiers,
    BootstrapSummary,
    CurveEstimate,
    ExperimentConfig,
    averaged_frontiers,
    bootstrap_delta,
    default_delta_grid,
    out_of_sample_curve,
    run_sweep,
)
from .inner import (
    InnerSolution,
    dual_inner_from_rewards,
    dual_inner_value,
    sensitivity_distribution,
    tilted_distribution_chi2,
)
from .models import (
    DemandMixtureParams,
    EmpiricalSample,
    InventoryParams,
    RewardModel,
    RewardStats,
    constant_reward,
    demand_moments,
    demand_quantile,
    gauss_hermite_population,
    gauss_laguerre_population,
    inventory_reward,
    population_expected_reward,
    population_optimal_order,
    population_reward_moments,
    quadratic_reward,
    reward_statistics,
    sample_demand,
    sample_demand_values,
)
from .sensitivity import (
    SensitivityReport,
    frontier,
    sensitivity_slope,
    worst_case_sensitivity,
)
from .solver import SolveResult, psi, solve_dro_doo, solve_family, solve_saa

__version__ = "0.1.0"

__all__ = [
    "AveragedFrontiers",
    "BootstrapSummary",
    "ConfigError",
    "CurveEstimate",
    "DemandMixtureParams",
    "EmpiricalSample",
    "ExpansionSummary",
    "ExperimentConfig",
    "InnerSolution",
    "InnerUnboundedError",
    "InventoryParams",
    "NonConcaveError",
    "OptimalDelta",
    "PhiDivergence",
    "RewardModel",
    "RewardStats",
    "RhoEstimate",
    "SandwichCovariance",
    "SensitivityReport",
    "SolveResult",
    "SolverError",
    "UnsupportedModelError",
    "ValidationError",
    "as_distribution",
    "averaged_frontiers",
    "bias_direction",
    "bootstrap_delta",
    "constant_reward",
    "default_delta_grid",
    "demand_moments",
    "demand_quantile",
    "divergence_value",
    "dual_inner_from_rewards",
    "dual_inner_value",
    "frontier",
    "gauss_hermite_population",
    "gauss_laguerre_population",
    "inventory_reward",
    "modified_chi2",
    "optimal_delta",
    "out_of_sample_curve",
    "population_expected_reward",
    "population_optimal_order",
    "population_reward_moments",
    "psi",
    "quadratic_reward",
    "reward_statistics",
    "rho_estimate",
    "run_sweep",
    "sample_demand",
    "sample_demand_values",
    "sandwich_covariance",
    "sensitivity_distribution",
    "sensitivity_slope",
    "solve_dro_doo",
    "solve_family",
    "solve_saa",
    "tilted_distribution_chi2",
    "worst_case_sensitivity",
    "__version__",
]
