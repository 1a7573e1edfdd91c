"""Piecewise classical / fractional / stochastic solvers for the Lotka-Volterra model."""

from .model import LotkaVolterraParams, State, equilibria, lipschitz_constants, uniqueness_criterion
from .solvers import (
    IntegrationDivergedError,
    PiecewiseSchedule,
    SegmentKind,
    SegmentSpec,
    Trajectory,
    solve_piecewise,
    solve_schedule,
)
from .special_functions import FractionalOrder, mittag_leffler

__version__ = "0.1.0"

__all__ = [
    "FractionalOrder",
    "IntegrationDivergedError",
    "LotkaVolterraParams",
    "PiecewiseSchedule",
    "SegmentKind",
    "SegmentSpec",
    "State",
    "Trajectory",
    "equilibria",
    "lipschitz_constants",
    "mittag_leffler",
    "solve_piecewise",
    "solve_schedule",
    "uniqueness_criterion",
]
