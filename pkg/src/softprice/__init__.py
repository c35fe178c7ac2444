"""Pricing engine for consumer-software licenses: closed-form user
equilibrium strategies, revenue evaluation over a type population, and
differential-evolution price optimization across pricing regimes."""

from .equilibrium import (
    CLASS_PRIORITY,
    Continuation,
    StrategyClass,
    StrategyEval,
    best_response,
    strategy_value,
)
from .market import (
    IntegrationConfig,
    MarketReport,
    Population,
    QuadratureError,
    arrival_pmf,
    check_quadrature,
    construct_sub_improvement,
    expected_revenue,
    sample_value,
    value_density,
)
from .model import (
    Action,
    PriceMenu,
    ProductConfig,
    UserState,
    UserType,
    immediate_payment,
    immediate_reward,
    immediate_utility,
    quality,
    subscription_access,
)
from .oracles import (
    OracleConfig,
    SimResult,
    SimTrace,
    mdp_best_utility,
    simulate_population,
    simulate_user,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "CLASS_PRIORITY",
    "Continuation",
    "IntegrationConfig",
    "MarketReport",
    "OracleConfig",
    "Population",
    "PriceMenu",
    "ProductConfig",
    "QuadratureError",
    "SimResult",
    "SimTrace",
    "StrategyClass",
    "StrategyEval",
    "UserState",
    "UserType",
    "arrival_pmf",
    "best_response",
    "check_quadrature",
    "construct_sub_improvement",
    "expected_revenue",
    "immediate_payment",
    "immediate_reward",
    "immediate_utility",
    "mdp_best_utility",
    "quality",
    "sample_value",
    "simulate_population",
    "simulate_user",
    "strategy_value",
    "subscription_access",
    "value_density",
    "__version__",
]
