"""cqnls: bound states with prescribed mass and angular momentum for the
cubic-quintic NLS in a polyharmonic trap, plus rotating-frame dynamics."""

from .grid import GridSpec
from .field import (
    Field,
    ProblemParams,
    FunctionalReport,
    functionals,
    gradient,
    hessian_vector,
    apply_lz,
    dilate,
    make_seed,
    zero_field,
)
from .constants import SharpConstants, gn_constant, sobolev_constant, sharp_constants

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "Field",
    "ProblemParams",
    "FunctionalReport",
    "functionals",
    "gradient",
    "hessian_vector",
    "apply_lz",
    "dilate",
    "make_seed",
    "zero_field",
    "SharpConstants",
    "gn_constant",
    "sobolev_constant",
    "sharp_constants",
    "__version__",
]
