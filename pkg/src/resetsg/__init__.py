"""Scaled-graph over-bounds of reset systems from piecewise quadratic storage LMIs,
and sample-based hyperbolic hulls that show how tight those bounds are."""

from .kernels import BACKEND
from .model import ResetSystem, load_system, r1_system, r2_system, save_system, validate

__all__ = ["BACKEND", "ResetSystem", "load_system", "r1_system", "r2_system", "save_system", "validate"]
__version__ = "0.1.0"
