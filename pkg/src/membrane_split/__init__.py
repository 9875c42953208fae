"""Point-constrained fourth-order membrane problems via a second-order splitting.

P1 surface finite elements on triangulated discs and spheres, Lagrange and
penalty treatments of the point constraints, and the convergence studies
that go with them.
"""
__version__ = "0.1.0"

from .assembly import FEFunction, FESpace, FormWeights, ScalarField, assemble_forms
from .mesh import (
    TriangleMesh,
    build_disc_mesh,
    build_octasphere,
    build_polar_sphere,
    mesh_size,
    refine,
)
from .metrics import eoc, fe_error_norm, lambda_error
from .saddle import SaddleConfig, SolutionBundle, solve_lagrange, solve_penalty

__all__ = [
    "FEFunction",
    "FESpace",
    "FormWeights",
    "ScalarField",
    "SaddleConfig",
    "SolutionBundle",
    "TriangleMesh",
    "assemble_forms",
    "build_disc_mesh",
    "build_octasphere",
    "build_polar_sphere",
    "eoc",
    "fe_error_norm",
    "lambda_error",
    "mesh_size",
    "refine",
    "solve_lagrange",
    "solve_penalty",
]
