"""Numerical vector-valued tent spaces on discretized upper half-spaces."""

__version__ = "0.1.0"

from .halfspace import BaseGrid, GridFunction, HalfSpaceGrid, NormedSpace, build_grid, restrict
from .sets import Ball, OpenSet

__all__ = ["Ball", "BaseGrid", "GridFunction", "HalfSpaceGrid", "NormedSpace", "OpenSet", "build_grid", "restrict"]
