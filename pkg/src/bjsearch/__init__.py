"""Price-dispersion equilibria of a simultaneous-search oligopoly with
uncertain marginal cost: solvers, welfare comparisons and a Monte Carlo
market simulator."""

__version__ = "0.1.0"

from .model import (
    ContinuousCosts,
    DiscreteCosts,
    DomainError,
    MarketParams,
    PriceLaw,
    SearchCostMode,
    benefit_factor,
    benefit_factor_deriv,
    cs_factor,
    market_power,
    price_ccdf,
    price_quantile,
    shopper_benefit_factor,
    shopper_weight,
)
from .solver import (
    EquilibriumSet,
    Stability,
    Thresholds,
    find_q_star,
    participation_check,
    solve_active,
    solve_observed,
    solve_shoppers,
    solve_unobserved,
    thresholds,
    unravel_disclosure,
)
from .welfare import welfare_report
from .simulator import SimulationConfig, simulate_market

__all__ = [name for name in dir() if not name.startswith("_")]
