"""Joint design of state prediction and URLLC transmission for zero-latency links."""

from .specfun import DomainError, Probability
from .codesign import (
    CoDesignSolution,
    DelayBudget,
    DeviceScenario,
    InfeasibleError,
    min_bandwidth,
    min_overall_error,
)
from .config import default_scenario, load_config

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "Probability",
    "CoDesignSolution",
    "DelayBudget",
    "DeviceScenario",
    "InfeasibleError",
    "min_bandwidth",
    "min_overall_error",
    "default_scenario",
    "load_config",
]
