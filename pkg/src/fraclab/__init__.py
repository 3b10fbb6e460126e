"""Fractional ground states on the interval and the line, with nondegeneracy checks."""

from .discretize import FracOp, Grid1D, GridFunction, apply, assemble, bilinear, constant_cs, integrate
from .groundstate import GroundState, solve, solve_ball, solve_line

__version__ = "0.1.0"

__all__ = [
    "FracOp",
    "Grid1D",
    "GridFunction",
    "GroundState",
    "apply",
    "assemble",
    "bilinear",
    "constant_cs",
    "integrate",
    "solve",
    "solve_ball",
    "solve_line",
    "__version__",
]
