"""P1 Lagrange spaces on triangulated surfaces and their matrices.

All integrals are taken over the flat triangles of the mesh.  Data fields
are evaluated at the closest-point lift of each quadrature point, which is
the usual affine surface finite element treatment of loads.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .exceptions import DegenerateTriangleError, NonFiniteFieldError, OffGridConstraintError
from .mesh import TriangleMesh, lift_point
from .quadrature import physical_points, triangle_rule

DEGENERATE_AREA = 1e-14


@dataclass(frozen=True)
class ScalarField:
    """A scalar function on the smooth surface.

    ``value`` and ``gradient`` act on arrays of points with a trailing axis
    of length 3; ``gradient`` returns the tangential (surface) gradient.
    ``singular_points`` lists points where the field may not be evaluated.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    singular_points: tuple = ()
    name: str = ""

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def scaled(self, s: float) -> "ScalarField":
        grad = None if self.gradient is None else (lambda x, g=self.gradient: s * g(x))
        return ScalarField(lambda x, v=self.value: s * v(x), grad, self.singular_points, self.name)

    @staticmethod
    def constant(c: float) -> "ScalarField":
        return ScalarField(
            lambda x: np.full(np.shape(x)[:-1], float(c)),
            lambda x: np.zeros(np.shape(x)),
            name=f"const({c})",
        )


class FESpace:
    """Continuous piecewise linear functions on ``mesh``.

    With ``dirichlet=True`` (disc meshes only) the boundary vertices carry
    homogeneous Dirichlet conditions and are flagged in ``dirichlet_mask``.
    """

    def __init__(self, mesh: TriangleMesh, dirichlet: bool = False):
        if dirichlet and mesh.geometry.is_sphere:
            raise ValueError("a closed sphere has no Dirichlet boundary")
        self.mesh = mesh
        self.dirichlet = dirichlet
        mask = np.zeros(mesh.num_vertices, dtype=bool)
        if dirichlet:
            mask[mesh.boundary_vertices] = True
        mask.setflags(write=False)
        self.dirichlet_mask = mask

    @property
    def ndof(self) -> int:
        return self.mesh.num_vertices

    @cached_property
    def free_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet_mask)

    @cached_property
    def areas(self) -> np.ndarray:
        return self._geometry[0]

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three local basis functions, shape (nt, 3, 3).

        Each gradient lies in the plane of its triangle.
        """
        return self._geometry[1]

    @cached_property
    def _geometry(self):
        p = self.mesh.vertices[self.mesh.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        g11 = np.einsum("td,td->t", e1, e1)
        g12 = np.einsum("td,td->t", e1, e2)
        g22 = np.einsum("td,td->t", e2, e2)
        det = g11 * g22 - g12 * g12
        area = 0.5 * np.sqrt(np.maximum(det, 0.0))
        bad = np.flatnonzero(area < DEGENERATE_AREA)
        if len(bad):
            raise DegenerateTriangleError(f"triangle {bad[0]} has area {area[bad[0]]:.3e}")
        inv11, inv12, inv22 = g22 / det, -g12 / det, g11 / det
        d1 = inv11[:, None] * e1 + inv12[:, None] * e2
        d2 = inv12[:, None] * e1 + inv22[:, None] * e2
        grads = np.stack([-d1 - d2, d1, d2], axis=1)
        return area, grads

    @cached_property
    def normals(self) -> np.ndarray:
        p = self.mesh.vertices[self.mesh.triangles]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def quadrature(self, degree: int):
        """Physical points (nt, nq, 3), lifted points, barycentrics and weights."""
        bary, weights = triangle_rule(degree)
        x = physical_points(self.mesh.vertices, self.mesh.triangles, bary)
        return x, lift_point(x, self.mesh.geometry), bary, weights


@dataclass
class FEFunction:
    space: FESpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.ndof,):
            raise ValueError(
                f"expected {self.space.ndof} coefficients, got {self.coefficients.shape}"
            )


@dataclass(frozen=True)
class FormWeights:
    """The form ``alpha * int grad u . grad v + beta * int u v``."""

    grad_coeff: float
    mass_coeff: float
    tag: str = "custom"


def stiffness_weights() -> FormWeights:
    return FormWeights(1.0, 0.0, "custom")


def b_weights() -> FormWeights:
    return FormWeights(1.0, 1.0, "b")


def m_weights() -> FormWeights:
    return FormWeights(0.0, 1.0, "m")


def sphere_c_weights(kappa: float = 1.0, sigma: float = 0.0, R: float = 1.0) -> FormWeights:
    return FormWeights(sigma / kappa - 2.0 - 2.0 / R**2, -(1.0 + 2.0 * sigma / (kappa * R**2)), "c")


def flat_c_weights(kappa: float = 1.0, sigma: float = 0.0) -> FormWeights:
    return FormWeights(sigma / kappa - 2.0, -1.0, "c")


def _scatter(space: FESpace, local: np.ndarray) -> sp.csr_matrix:
    tris = space.mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = space.ndof
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    # exact symmetry regardless of accumulation order
    A = (0.5 * (A + A.T)).tocsr()
    A.sort_indices()
    return A


def assemble_stiffness(space: FESpace) -> sp.csr_matrix:
    g = space.basis_gradients
    local = space.areas[:, None, None] * np.einsum("tid,tjd->tij", g, g)
    return _scatter(space, local)


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def assemble_mass(space: FESpace) -> sp.csr_matrix:
    local = space.areas[:, None, None] * _MASS_REF[None]
    return _scatter(space, local)


def _check_finite(vals: np.ndarray, what: str):
    if not np.all(np.isfinite(vals)):
        raise NonFiniteFieldError(f"non-finite field value at a {what}")


def _accumulate(space: FESpace, local: np.ndarray) -> np.ndarray:
    return np.bincount(
        space.mesh.triangles.ravel(), weights=local.ravel(), minlength=space.ndof
    )


def assemble_load(space: FESpace, field: ScalarField, quad_degree: int = 4) -> np.ndarray:
    """Load vector ``F_i = int f(p(x)) phi_i(x)`` over the flat triangles."""
    _, xl, bary, weights = space.quadrature(quad_degree)
    vals = field.value(xl)
    _check_finite(vals, "quadrature node")
    local = space.areas[:, None] * np.einsum("tq,q,qk->tk", vals, weights, bary)
    return _accumulate(space, local)


def assemble_b_load(space: FESpace, field: ScalarField, quad_degree: int = 4) -> np.ndarray:
    """Vector ``int grad f . grad phi_i + f phi_i`` (Ritz projection data).

    The exact surface gradient is projected onto each triangle plane.
    """
    if field.gradient is None:
        raise ValueError("field has no gradient")
    _, xl, bary, weights = space.quadrature(quad_degree)
    vals = field.value(xl)
    grads = field.gradient(xl)
    _check_finite(vals, "quadrature node")
    _check_finite(grads, "quadrature node")
    mass = np.einsum("tq,q,qk->tk", vals, weights, bary)
    mean_grad = np.einsum("tqd,q->td", grads, weights)
    stiff = np.einsum("td,tkd->tk", mean_grad, space.basis_gradients)
    return _accumulate(space, space.areas[:, None] * (mass + stiff))


def form_matrix(K: sp.spmatrix, M: sp.spmatrix, weights: FormWeights) -> sp.csr_matrix:
    if K.shape != M.shape:
        raise ValueError(f"dimension mismatch {K.shape} vs {M.shape}")
    A = (weights.grad_coeff * K + weights.mass_coeff * M).tocsr()
    A.sort_indices()
    return A


def point_eval_matrix(space: FESpace, points, tol: float = 1e-12) -> sp.csr_matrix:
    """Sparse N x ndof matrix of nodal evaluation at registered constraint points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    registry = np.array(sorted(set(space.mesh.constraint_vertices.values())), dtype=np.int64)
    coords = space.mesh.vertices[registry]
    cols = []
    for x in points:
        d = np.linalg.norm(coords - x, axis=1)
        k = int(np.argmin(d))
        if d[k] > tol:
            raise OffGridConstraintError(f"constraint point off-grid: {tuple(x)}")
        cols.append(registry[k])
    n = len(cols)
    return sp.csr_matrix((np.ones(n), (np.arange(n), cols)), shape=(n, space.ndof))


def mean_vector(space: FESpace, M: sp.spmatrix | None = None) -> np.ndarray:
    """Integrals of the basis functions, ``a_i = int phi_i``."""
    if M is None:
        M = assemble_mass(space)
    return np.asarray(M @ np.ones(space.ndof)).ravel()


def interpolate(space: FESpace, field: ScalarField) -> FEFunction:
    x = lift_point(space.mesh.vertices, space.mesh.geometry)
    vals = np.asarray(field.value(x), dtype=float)
    _check_finite(vals, "vertex")
    return FEFunction(space, vals)


@dataclass
class AssembledForms:
    """Stiffness/mass pair plus the c, b, m matrices of the split problem."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    C: sp.csr_matrix
    B: sp.csr_matrix
    Mw: sp.csr_matrix
    c_weights: FormWeights


def assemble_forms(space: FESpace, c_weights: FormWeights) -> AssembledForms:
    K = assemble_stiffness(space)
    M = assemble_mass(space)
    return AssembledForms(
        K=K,
        M=M,
        C=form_matrix(K, M, c_weights),
        B=form_matrix(K, M, b_weights()),
        Mw=form_matrix(K, M, m_weights()),
        c_weights=c_weights,
    )
