"""Pseudo-spectral toolkit for the three-scale low Mach / low Alfvén number MHD limit."""

from .kernels import BACKEND
from .params import ScaleParams
from .spectral import Grid
from .state import FIELD_NAMES, State

__version__ = "0.1.0"

__all__ = ["BACKEND", "FIELD_NAMES", "Grid", "ScaleParams", "State", "__version__"]
