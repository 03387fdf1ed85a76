"""Fuel-cell hybrid energy management: plant simulation and fuzzy Q-learning."""

__version__ = "0.1.0"

from .accel import USING_NUMBA

__all__ = ["USING_NUMBA", "__version__"]
