"""Dynamic Mean-CVaR portfolio selection in a complete Black-Scholes market.

Closed-form threshold-system solvers for the static payoff-selection problem,
explicit replication of the optimal payoffs, a brute-force LP oracle on a
discretized market, efficient-frontier sweeps, and an HTTP service + CLI.
"""

from .configurations import (
    ConstantPayoff,
    PayoffConfig,
    ProblemSpec,
    ThreeLine,
    TwoLineLowMid,
    TwoLineLowUp,
    TwoLineMidUp,
    capital,
    cvar,
    expected_return,
    expected_shortfall,
    payoff_at_rho,
    validate_against,
)
from .dynamics import (
    HedgePlan,
    PathSimResult,
    d_minus,
    d_plus,
    empirical_cvar,
    hedge_shares,
    portfolio_value,
    simulate_paths,
    simulate_replication,
)
from .frontier import FrontierPoint, default_grid, sweep, to_csv
from .market import (
    MarketParams,
    RNDModel,
    rho_of_terminal_price,
    terminal_price_of_rho,
)
from .oracle import (
    DiscreteMarket,
    LPResult,
    count_level_sets,
    discretize,
    lp_mean_cvar,
    lp_step1,
)
from .static_solver import (
    BarSystem,
    BracketError,
    CaseLabel,
    Diagnostics,
    DoubleStarSystem,
    InfeasibleReturnError,
    MeanCVaRSolver,
    Solution,
    SolverContractError,
    StarSystem,
    UsageError,
    two_line_epsilon_config,
)

__version__ = "0.1.0"

__all__ = [
    "MarketParams",
    "RNDModel",
    "rho_of_terminal_price",
    "terminal_price_of_rho",
    "ProblemSpec",
    "PayoffConfig",
    "ConstantPayoff",
    "TwoLineLowMid",
    "TwoLineMidUp",
    "TwoLineLowUp",
    "ThreeLine",
    "capital",
    "expected_return",
    "expected_shortfall",
    "cvar",
    "payoff_at_rho",
    "validate_against",
    "MeanCVaRSolver",
    "Solution",
    "CaseLabel",
    "Diagnostics",
    "BarSystem",
    "StarSystem",
    "DoubleStarSystem",
    "InfeasibleReturnError",
    "BracketError",
    "SolverContractError",
    "UsageError",
    "two_line_epsilon_config",
    "HedgePlan",
    "PathSimResult",
    "portfolio_value",
    "hedge_shares",
    "simulate_paths",
    "simulate_replication",
    "empirical_cvar",
    "d_minus",
    "d_plus",
    "DiscreteMarket",
    "LPResult",
    "discretize",
    "lp_mean_cvar",
    "lp_step1",
    "count_level_sets",
    "FrontierPoint",
    "sweep",
    "default_grid",
    "to_csv",
    "__version__",
]
