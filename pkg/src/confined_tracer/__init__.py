"""Confined tracer between two thermal walls: simulation and current statistics."""

from .model import (
    CollisionRecord,
    CurrentStats,
    ScaledParams,
    WallParams,
    conductivity,
    equilibrium_variance_rate,
    green_kubo_variance,
    j_star,
    mean_gap,
    scaling_conductivity,
    speed_fourth_moment,
)

__version__ = "0.1.0"

__all__ = [
    "CollisionRecord",
    "CurrentStats",
    "ScaledParams",
    "WallParams",
    "conductivity",
    "equilibrium_variance_rate",
    "green_kubo_variance",
    "j_star",
    "mean_gap",
    "scaling_conductivity",
    "speed_fourth_moment",
    "__version__",
]
