"""Multi-user uplink model for arrays of Rydberg atomic receivers.

Channel generation, MMSE estimation, MRC/ZF detection with Monte Carlo rates,
closed-form rate bounds with RF baselines, and link-budget factors.
"""
from .bounds import BoundInputs, RateBound, rate_bound
from .config import Scenario, load_scenario, parse_scenario
from .detection import RateEstimate, empirical_rate, empirical_rates
from .errors import RaqMimoError
from .params import FrontEnd, RfFrontEndSpec, SystemConfig, UserLink, rf_front_end

__all__ = [
    "BoundInputs",
    "FrontEnd",
    "RaqMimoError",
    "RateBound",
    "RateEstimate",
    "RfFrontEndSpec",
    "Scenario",
    "SystemConfig",
    "UserLink",
    "empirical_rate",
    "empirical_rates",
    "load_scenario",
    "parse_scenario",
    "rate_bound",
    "rf_front_end",
]

__version__ = "0.1.0"
