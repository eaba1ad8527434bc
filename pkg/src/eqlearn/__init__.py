"""eqlearn: offline learning of feature-dependent equilibrium decision
functions for stochastic multiplayer games with expectation constraints."""

__version__ = "0.1.0"

from .basis import BasisSet, evaluate_basis, evaluate_basis_batch, evaluate_decision, make_polynomial_basis
from .games import (
    CoefficientProfile,
    GameDefinition,
    ProfileLayout,
    SampleSet,
    affine_game,
    empirical_constraint,
    empirical_constraint_gradient,
    empirical_pseudo_gradient,
    expected_pseudo_gradient_mc,
    production_game,
    pseudo_gradient_scenario,
    toy_quadratic_game,
)
from .feasible import (
    FeasibleSetSpec,
    InfeasibleOrIllConditioned,
    project_ball,
    project_feasible,
    project_profile,
    sandwich_test,
)
from .solver import (
    NumericalBlowup,
    SolveReport,
    SolverConfig,
    natural_residual,
    relative_distance,
    solve_offline,
    solve_online,
)
from .bounds import (
    BoundReport,
    LDParams,
    covering_count,
    epsilon_schedule,
    estimate_ld_params,
    feasible_set_bound,
    gradient_deviation_bound,
    min_samples,
    monte_carlo_deviation_study,
)
from .portfolio import (
    PortfolioParams,
    build_portfolio_game,
    evaluate_on_test,
    make_default_generator,
)

__all__ = [name for name in dir() if not name.startswith("_")]
