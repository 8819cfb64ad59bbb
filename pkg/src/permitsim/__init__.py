"""Transferable-permits market with strategic trading, technology adoption and price support."""

__version__ = "0.1.0"

from .adoption import AdoptionTrajectory, BudgetExceeded, count_scenarios, run_adoption
from .config import (
    ConfigError,
    EconomyParams,
    EconomyPath,
    FirmParams,
    ModelParams,
    Options,
    PolicyParams,
    Shock,
    Tech,
    TechnologyVector,
    firm_interpolate,
    load_config,
    reference_scenario,
    validate,
)
from .market import SolverError, best_response, clear_market, price, reaction, solve_game
from .risk import avar, upper_quantile, var
from .simulate import EnsembleResult, PhaseSample, monte_carlo, simulate_phase

__all__ = [
    "AdoptionTrajectory", "BudgetExceeded", "ConfigError", "EconomyParams", "EconomyPath",
    "EnsembleResult", "FirmParams", "ModelParams", "Options", "PhaseSample", "PolicyParams",
    "Shock", "SolverError", "Tech", "TechnologyVector", "avar", "best_response", "clear_market",
    "count_scenarios", "firm_interpolate", "load_config", "monte_carlo", "price", "reaction",
    "reference_scenario", "run_adoption", "simulate_phase", "solve_game", "upper_quantile",
    "validate", "var",
]
