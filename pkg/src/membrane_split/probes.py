"""Numerical checks of the structural assumptions behind the split solver.

Every probe here uses dense linear algebra and is meant for small meshes.
The probes certify structure (coercivity over the coupled kernel, inf-sup
health, consistency of the manufactured data), not performance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    AssembledForms,
    FEFunction,
    FESpace,
    ScalarField,
    assemble_b_load,
    assemble_forms,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    b_weights,
    form_matrix,
    mean_vector,
    point_eval_matrix,
)
from .exceptions import ProbeSizeError, SingularSystemError
from .problems import ExactProblem
from .saddle import SaddleConfig, assemble_block_system

MAX_PROBE_DOFS = 5000


@dataclass(frozen=True)
class ProbeReport:
    """Per-level scalars of one probe and the verdict of its pass rule."""

    name: str
    levels: tuple
    values: tuple
    threshold: float
    verdict: bool
    rule: str

    def line(self) -> str:
        vals = ", ".join(f"L{k}={v:.6e}" for k, v in zip(self.levels, self.values))
        status = "PASS" if self.verdict else "FAIL"
        return f"{status} {self.name}: {self.rule} (threshold {self.threshold:g}); {vals}"


def _guard(n: int):
    if n > MAX_PROBE_DOFS:
        raise ProbeSizeError(f"{n} dofs exceed the dense probe limit {MAX_PROBE_DOFS}")


def ritz_projection(
    space: FESpace, field: ScalarField | FEFunction, quad_degree: int = 4
) -> FEFunction:
    """The b-orthogonal projection onto P1: b(P f, v) = b(f, v) for all v.

    Uses b(u, v) = int grad u . grad v + u v, which is SPD on any mesh.  A
    discrete ``field`` is projected through its exact b-load.
    """
    Bm = (assemble_stiffness(space) + assemble_mass(space)).tocsc()
    if isinstance(field, FEFunction):
        rhs = Bm @ field.coefficients
    else:
        rhs = assemble_b_load(space, field, quad_degree)
    try:
        coeffs = spla.splu(Bm).solve(rhs)
    except RuntimeError as exc:
        raise SingularSystemError(f"b-matrix factorization failed: {exc}") from exc
    return FEFunction(space, coeffs)


def _reduced_basis(space: FESpace, a: np.ndarray, mean_zero: bool) -> np.ndarray:
    """Columns spanning the admissible coefficient vectors (dense)."""
    free = space.free_dofs
    E = np.eye(space.ndof)[:, free]
    if mean_zero:
        E = E @ sla.null_space(a[free][None, :])
    return E


def coercivity_probe(
    space: FESpace,
    forms: AssembledForms,
    T: sp.spmatrix,
    epsilon0: float,
    mean_zero: bool | None = None,
) -> float:
    """Smallest Rayleigh quotient Q(w) / m(w, w) over the coupled kernel.

    For each admissible w, u solves b(u, xi) = m(w, xi) and
    Q(w) = c(u, u) + |Tu|^2 / epsilon0 + m(w, w).  A positive value is the
    discrete coercivity constant of the splitting.
    """
    if not epsilon0 > 0:
        raise ValueError("epsilon0 must be positive")
    _guard(space.ndof)
    if mean_zero is None:
        mean_zero = space.mesh.geometry.is_sphere
    free = space.free_dofs
    a = mean_vector(space, forms.M)
    Bd = forms.B.toarray()[np.ix_(free, free)]
    Md = forms.Mw.toarray()[np.ix_(free, free)]
    Cd = forms.C.toarray()[np.ix_(free, free)]
    Td = sp.csr_matrix(T).toarray()[:, free]
    G = sla.solve(Bd, Md, assume_a="pos")
    Q = G.T @ (Cd + Td.T @ Td / epsilon0) @ G + Md
    P = _reduced_basis(space, a, mean_zero)[free]
    Qr = P.T @ Q @ P
    Mr = P.T @ Md @ P
    Qr = 0.5 * (Qr + Qr.T)
    mu = sla.eigh(Qr, 0.5 * (Mr + Mr.T), eigvals_only=True, subset_by_index=[0, 0])
    return float(mu[0])


def saddle_infsup_probe(
    space: FESpace,
    forms: AssembledForms,
    T: sp.spmatrix,
    a: np.ndarray | None = None,
    mean_constraints: bool | None = None,
) -> float:
    """Smallest |mu| of A x = mu N x for the full Lagrange matrix A.

    N = blockdiag(b, b, I, 1, 1) is the H1 x H1 x l2 surrogate norm, so the
    result is the smallest generalized singular value of the saddle matrix.
    """
    free = space.free_dofs
    _guard(len(free))
    if mean_constraints is None:
        mean_constraints = space.mesh.geometry.is_sphere
    if a is None:
        a = mean_vector(space, forms.M)
    T = sp.csr_matrix(T)
    n_pts = T.shape[0]
    config = SaddleConfig(
        np.zeros((n_pts, 3)),
        np.zeros(n_pts),
        "lagrange",
        mean_constraint_u=mean_constraints,
        mean_constraint_w=mean_constraints,
    )
    sub = lambda X: X[free][:, free]  # noqa: E731
    n = len(free)
    A, _ = assemble_block_system(
        sub(forms.C), sub(forms.B), sub(forms.Mw), T[:, free], a[free],
        np.zeros(n), np.zeros(n), config,
    )
    Bd = sub(forms.B).toarray()
    extra = A.shape[0] - 2 * n
    N = sla.block_diag(Bd, Bd, np.eye(extra))
    mu = sla.eigh(A.toarray(), N, eigvals_only=True)
    return float(np.min(np.abs(mu)))


def _singular_vertices(space: FESpace, points) -> np.ndarray:
    v = space.mesh.vertices
    hits = [np.flatnonzero(np.linalg.norm(v - p, axis=1) < 1e-12) for p in np.atleast_2d(points)]
    return np.unique(np.concatenate(hits)) if hits else np.zeros(0, dtype=np.int64)


def _singular_star(space: FESpace, points) -> tuple[np.ndarray, np.ndarray]:
    """Singular vertices and the mask of vertices equal or adjacent to them."""
    mask = np.zeros(space.ndof, dtype=bool)
    if not len(points):
        return np.zeros(0, dtype=np.int64), mask
    sing = _singular_vertices(space, np.asarray(points, dtype=float))
    tris = space.mesh.triangles
    touching = np.any(np.isin(tris, sing), axis=1)
    mask[np.unique(tris[touching])] = True
    return sing, mask


def residual_vectors(
    space: FESpace,
    problem: ExactProblem,
    forms: AssembledForms | None = None,
    quad_degree: int = 4,
):
    """Row residuals of both equations at the interpolated exact solution.

    Returns ``(r_u, r_w, keep)``; ``keep`` lists the rows whose basis support
    avoids every singular vertex of the exact fields (and the Dirichlet
    boundary).  Values at the singular vertices themselves are set to 0 and
    never enter a kept row.
    """
    if forms is None:
        forms = assemble_forms(space, problem.c_weights)
    singular = tuple(problem.w.singular_points) + tuple(problem.u.singular_points)
    sing, skip = _singular_star(space, singular)
    ok = np.ones(space.ndof, dtype=bool)
    ok[sing] = False
    x = space.mesh.vertices
    vals_u = np.zeros(space.ndof)
    vals_w = np.zeros(space.ndof)
    vals_u[ok] = problem.u.value(x[ok])
    vals_w[ok] = problem.w.value(x[ok])
    F = assemble_load(space, problem.f, quad_degree)
    G = assemble_load(space, problem.g, quad_degree)
    T = point_eval_matrix(space, problem.points)
    lam = problem.lambda_exact if problem.lambda_exact is not None else np.zeros(len(problem.Z))
    r_u = forms.C @ vals_u + forms.B @ vals_w + T.T @ lam - F
    r_w = forms.B @ vals_u - forms.Mw @ vals_w - G
    if space.mesh.geometry.is_sphere:
        a = mean_vector(space, forms.M)
        r_u = r_u + a * problem.p_bar_exact
        r_w = r_w + a * problem.q_bar_exact
    keep = np.flatnonzero(~skip & ~space.dirichlet_mask)
    return r_u, r_w, keep


def discrete_dual_norm(forms: AssembledForms, keep: np.ndarray, r: np.ndarray) -> float:
    """sqrt(r^T B^{-1} r) over the rows ``keep``, B the b-matrix."""
    Bk = forms.B[keep][:, keep].tocsc()
    rk = np.asarray(r)[keep]
    return float(np.sqrt(max(rk @ spla.splu(Bk).solve(rk), 0.0)))


def residual_probe(
    space: FESpace,
    problem: ExactProblem,
    forms: AssembledForms | None = None,
    quad_degree: int = 4,
) -> dict:
    """Dual norms of the Lagrange-system residual at the interpolated exact solution."""
    if forms is None:
        forms = assemble_forms(space, problem.c_weights)
    r_u, r_w, keep = residual_vectors(space, problem, forms, quad_degree)
    d1 = discrete_dual_norm(forms, keep, r_u)
    d2 = discrete_dual_norm(forms, keep, r_w)
    return {"u_equation": d1, "w_equation": d2, "total": float(np.hypot(d1, d2))}


def kernel_infsup_probe(
    space: FESpace,
    forms: AssembledForms,
    T: sp.spmatrix,
    mean_zero: bool | None = None,
) -> float:
    """Inf-sup constant of the (u, w) block on the kernel of the constraints.

    u ranges over {Tu = 0} (and mean zero on closed surfaces), w over the
    mean-zero space; both carry the b-norm.  Unlike ``saddle_infsup_probe``
    no multiplier block is involved, so the value isolates the operator
    part that fails when the constraint points cannot fix a kernel mode.
    """
    free = space.free_dofs
    _guard(len(free))
    if mean_zero is None:
        mean_zero = space.mesh.geometry.is_sphere
    a = mean_vector(space, forms.M)[free]
    Td = sp.csr_matrix(T).toarray()[:, free]
    rows_u = np.vstack([Td, a[None]]) if mean_zero else Td
    Zu = sla.null_space(rows_u) if len(rows_u) else np.eye(len(free))
    Zw = sla.null_space(a[None]) if mean_zero else np.eye(len(free))
    C, B, M = (X[free][:, free].toarray() for X in (forms.C, forms.B, forms.Mw))
    A = np.block([[Zu.T @ C @ Zu, Zu.T @ B @ Zw], [Zw.T @ B @ Zu, -Zw.T @ M @ Zw]])
    N = sla.block_diag(Zu.T @ B @ Zu, Zw.T @ B @ Zw)
    mu = sla.eigh(0.5 * (A + A.T), 0.5 * (N + N.T), eigvals_only=True)
    return float(np.min(np.abs(mu)))


def spd_forms(forms: AssembledForms) -> AssembledForms:
    """Copy of ``forms`` with c replaced by b (the coercive reference case)."""
    return AssembledForms(
        forms.K, forms.M, form_matrix(forms.K, forms.M, b_weights()), forms.B, forms.Mw, b_weights()
    )


_EQUATOR = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0], [0, -1.0, 0]])


def _x3_field() -> ScalarField:
    return ScalarField(
        lambda x: x[..., 2],
        lambda x: np.eye(3)[2] - x[..., 2][..., None] * x,
        name="x3",
    )


def run_probe_suite(
    levels=(1, 2, 3),
    epsilon0: float = 0.01,
    coplanar_level: int = 4,
    ritz_levels=(1, 2, 3, 4),
    residual_levels=(1, 2, 3),
) -> list[ProbeReport]:
    """All structural probes on octasphere / disc meshes, one report each."""
    from .metrics import L2, fe_error_norm
    from .mesh import build_disc_mesh, build_octasphere
    from .problems import flat_problem, sphere_problem

    reports = []
    x3 = _x3_field()
    errs, idem = [], []
    for k in ritz_levels:
        V = FESpace(build_octasphere(k))
        P = ritz_projection(V, x3)
        errs.append(fe_error_norm(V, P, x3, L2)[0])
        again = ritz_projection(V, P)
        idem.append(float(np.max(np.abs(again.coefficients - P.coefficients))))
    ratios = [e1 / e2 for e1, e2 in zip(errs, errs[1:])]
    reports.append(
        ProbeReport("ritz_l2_error_x3", tuple(ritz_levels), tuple(errs), 3.0,
                    bool(min(ratios) >= 3.0), "error ratio per refinement >= threshold")
    )
    reports.append(
        ProbeReport("ritz_idempotence", tuple(ritz_levels), tuple(idem), 1e-12,
                    bool(max(idem) <= 1e-12), "max |P(P f) - P f| <= threshold")
    )

    sphere = sphere_problem()
    mus, full, kern = [], [], []
    for k in levels:
        V = FESpace(build_octasphere(k))
        forms = assemble_forms(V, sphere.c_weights)
        T = point_eval_matrix(V, sphere.points)
        mus.append(coercivity_probe(V, forms, T, epsilon0))
        full.append(saddle_infsup_probe(V, forms, T))
        kern.append(kernel_infsup_probe(V, forms, T))
    lv = tuple(levels)
    reports.append(
        ProbeReport(f"coercivity_mu(eps0={epsilon0:g})", lv, tuple(mus), 0.5,
                    bool(min(mus) > 0 and min(mus) >= 0.5 * max(mus)),
                    "mu > 0 and min/max over levels >= threshold")
    )
    reports.append(
        ProbeReport("saddle_infsup", lv, tuple(full), 0.5,
                    bool(min(full) > 0 and min(full) >= 0.5 * max(full)),
                    "min/max over levels >= threshold")
    )
    reports.append(
        ProbeReport("kernel_infsup", lv, tuple(kern), 0.5,
                    bool(min(kern) > 0 and min(kern) >= 0.5 * max(kern)),
                    "min/max over levels >= threshold")
    )

    V = FESpace(build_octasphere(coplanar_level))
    forms = assemble_forms(V, sphere.c_weights)
    six = kernel_infsup_probe(V, forms, point_eval_matrix(V, sphere.points))
    four = kernel_infsup_probe(V, forms, point_eval_matrix(V, _EQUATOR))
    reports.append(
        ProbeReport("coplanar_degradation", (coplanar_level,), (six / four,), 10.0,
                    bool(six / four >= 10.0),
                    "kernel inf-sup (6 axis points) / (4 equator points) >= threshold")
    )

    flat = flat_problem()
    res = [
        residual_probe(FESpace(build_disc_mesh(k), dirichlet=True), flat)["total"]
        for k in residual_levels
    ]
    reports.append(
        ProbeReport("residual_flat", tuple(residual_levels), tuple(res), 0.0,
                    bool(all(b < a for a, b in zip(res, res[1:]))),
                    "strictly decreasing in h")
    )
    return reports
