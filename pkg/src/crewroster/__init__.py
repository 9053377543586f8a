"""Pilot crew rostering: branch-and-price, windowing and a learned warm start."""

from .errors import CrewRosterError
from .model import Instance, Pairing, Pilot, Roster, RuleParams, Schedule, check_roster, roster_objective

__version__ = "0.1.0"

__all__ = [
    "CrewRosterError", "Instance", "Pairing", "Pilot", "Roster", "RuleParams", "Schedule",
    "check_roster", "roster_objective", "__version__",
]
