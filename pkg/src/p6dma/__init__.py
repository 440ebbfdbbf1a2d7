"""Polarised 6D movable-antenna channel model and two-timescale optimisation."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
