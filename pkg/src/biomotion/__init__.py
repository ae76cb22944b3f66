"""Spiking-network motion detection: a per-pixel hybrid detector and a direction classifier."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
