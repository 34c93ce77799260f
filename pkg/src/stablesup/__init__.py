"""Simulation, density estimation and bounds for the supremum of a stable process."""

from __future__ import annotations

from .stable_core import StableParams, validate_params

__version__ = "0.1.0"

__all__ = ["StableParams", "validate_params", "__version__"]
