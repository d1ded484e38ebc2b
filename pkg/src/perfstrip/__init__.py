"""Self-similar subharmonic potential on a perforated strip.

Construction pipeline: exact dyadic square geometry, finite-difference
Dirichlet solves on the perforated period cell, self-similar extension
into the squares via the fundamental square's Green function, gluing
across the real axis, conformal transport to the annulus 1 < |zeta| < 2,
and a named-check verification suite for every inequality the
construction rests on.
"""

from .geometry import GroupElement, SquareSpec, PeriodCell
from .laplace import Field, GreenField, SolverError, solve_dirichlet, green_square, sub_mean_test
from .assembler import HalfStripModel, GluedPotential, build_glued
from .verify import CheckRecord, DecayTable
from .annulus import AnnulusPotential, build_annulus

__all__ = [
    "GroupElement",
    "SquareSpec",
    "PeriodCell",
    "Field",
    "GreenField",
    "SolverError",
    "solve_dirichlet",
    "green_square",
    "sub_mean_test",
    "HalfStripModel",
    "GluedPotential",
    "build_glued",
    "CheckRecord",
    "DecayTable",
    "AnnulusPotential",
    "build_annulus",
]

__version__ = "0.1.0"
