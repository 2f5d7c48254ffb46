"""Transmission capacity of ad hoc networks with zero-forcing interference
cancellation: closed-form outage bounds, scaling laws, and Monte Carlo
network simulation for cross-validating them."""

__version__ = "0.1.0"

from .model import NetworkParams, DerivedConstants, derive_constants
from .analysis import (
    AsymptoticConstants,
    CapacityResult,
    OutageBounds,
    asymptotic_constants,
    outage_bounds,
    outage_lower,
    outage_upper,
    solve_capacity,
)
from .simulator import OutageEstimate, SimConfig, estimate_outage
from .special import QuadratureSpec

__all__ = [
    "__version__",
    "NetworkParams",
    "DerivedConstants",
    "derive_constants",
    "AsymptoticConstants",
    "CapacityResult",
    "OutageBounds",
    "asymptotic_constants",
    "outage_bounds",
    "outage_lower",
    "outage_upper",
    "solve_capacity",
    "OutageEstimate",
    "SimConfig",
    "estimate_outage",
    "QuadratureSpec",
]
