"""Block saddle point systems for point-constrained split problems.

Lagrange form, unknowns ``(u, w, lam, p_bar, q_bar)``::

    [ C   B   T^T  a   0 ] [u]     [F]
    [ B  -M   0    0   a ] [w]     [G]
    [ T   0   0    0   0 ] [lam] = [Z]
    [ a^T 0   0    0   0 ] [p]     [0]
    [ 0   a^T 0    0   0 ] [q]     [0]

Penalty form drops ``lam`` and replaces ``C`` by ``C + T^T T / eps`` and
``F`` by ``F + T^T Z / eps``, both scaled by ``penalty_weight`` (default 1).
Rows/columns for ``p_bar``/``q_bar`` are present only when the matching
mean constraint is switched on.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import pymetis

from .assembly import AssembledForms, FEFunction, FESpace, mean_vector, point_eval_matrix
from .exceptions import SingularSystemError

EPSILON_FLOOR = 1e-14
HARD_CONSTRAINT_EPSILON = 1e-8
_EPS_WARN = 1e-10


@dataclass(frozen=True)
class SaddleConfig:
    points: np.ndarray
    targets: np.ndarray
    mode: str = "lagrange"  # or "penalty"
    epsilon: Optional[float] = None
    mean_constraint_u: bool = False
    mean_constraint_w: bool = False
    dirichlet: bool = False
    # penalty term is penalty_weight / epsilon * |Tu - Z|^2 / 2
    penalty_weight: float = 1.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        z = np.asarray(self.targets, dtype=float).ravel()
        if len(pts) != len(z):
            raise ValueError("one target value per constraint point required")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "targets", z)
        if self.mode not in ("lagrange", "penalty"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "penalty":
            if self.epsilon is None or not self.epsilon >= EPSILON_FLOOR:
                raise ValueError(f"penalty epsilon must be >= {EPSILON_FLOOR}, got {self.epsilon}")
        if not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")

    def with_mode(self, mode: str, epsilon: Optional[float] = None) -> "SaddleConfig":
        return SaddleConfig(
            self.points,
            self.targets,
            mode,
            epsilon,
            self.mean_constraint_u,
            self.mean_constraint_w,
            self.dirichlet,
            self.penalty_weight,
        )

    @property
    def num_points(self) -> int:
        return len(self.targets)


def penalty_config(config: SaddleConfig, epsilon: float) -> SaddleConfig:
    return config.with_mode("penalty", epsilon)


@dataclass
class SolutionBundle:
    u: FEFunction
    w: FEFunction
    lam: Optional[np.ndarray] = None
    p_bar: Optional[float] = None
    q_bar: Optional[float] = None
    multiplier_recovery: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)


def assemble_block_system(C, B, M, T, a, F, G, config: SaddleConfig):
    """Return the symmetric block matrix (CSC) and right-hand side."""
    n = C.shape[0]
    for name, mat in (("B", B), ("M", M)):
        if mat.shape != (n, n):
            raise ValueError(f"dimension mismatch: {name} is {mat.shape}, C is {C.shape}")
    T = sp.csr_matrix(T)
    if T.shape[1] != n or T.shape[0] != config.num_points:
        raise ValueError(f"dimension mismatch: T is {T.shape}")
    a = np.asarray(a, dtype=float).ravel()
    F = np.asarray(F, dtype=float).ravel()
    G = np.asarray(G, dtype=float).ravel()
    if not (len(a) == len(F) == len(G) == n):
        raise ValueError("dimension mismatch in vectors")
    Z = config.targets
    a_col = sp.csr_matrix(a[:, None])
    zero_col = sp.csr_matrix((n, 1))

    if config.mode == "penalty":
        eps = config.epsilon
        if eps < EPSILON_FLOOR:
            raise ValueError(f"epsilon below floor {EPSILON_FLOOR}")
        if eps < _EPS_WARN:
            warnings.warn(f"penalty epsilon {eps:g} may make the system ill-conditioned")
        scale = config.penalty_weight / eps
        C = C + (T.T @ T) * scale
        F = F + (T.T @ Z) * scale

    # blocks[i][j]; None means zero
    rows = [[C, B], [B, -M]]
    rhs = [F, G]
    if config.mode == "lagrange":
        N = config.num_points
        rows[0].append(T.T)
        rows[1].append(None)
        rows.append([T, None, sp.csr_matrix((N, N))])
        rhs.append(Z)
    if config.mean_constraint_u:
        for r in rows:
            r.append(None)
        rows[0][-1] = a_col
        rows.append([a_col.T] + [None] * (len(rows[0]) - 1))
        rows[-1][-1] = sp.csr_matrix((1, 1))
        rhs.append(np.zeros(1))
    if config.mean_constraint_w:
        for r in rows:
            r.append(None)
        rows[1][-1] = a_col
        rows.append([zero_col.T, a_col.T] + [None] * (len(rows[0]) - 2))
        rows[-1][-1] = sp.csr_matrix((1, 1))
        rhs.append(np.zeros(1))
    A = sp.bmat(rows, format="csc")
    A.sort_indices()
    return A, np.concatenate(rhs)


def _restrict(forms: AssembledForms, space: FESpace, F, G, T):
    idx = space.free_dofs
    sub = lambda A: A[idx][:, idx].tocsr()  # noqa: E731
    return sub(forms.C), sub(forms.B), sub(forms.Mw), T[:, idx], F[idx], G[idx], idx


def nested_dissection_order(pattern: sp.spmatrix) -> np.ndarray:
    """Fill-reducing order of the vertices of a symmetric sparsity pattern."""
    adj = sp.csr_matrix(pattern, copy=True)
    adj.setdiag(0)
    adj.eliminate_zeros()
    if adj.shape[0] < 3 or adj.nnz == 0:
        return np.arange(adj.shape[0])
    graph = pymetis.CSRAdjacency(adj.indptr.tolist(), adj.indices.tolist())
    perm, _ = pymetis.nested_dissection(graph)
    return np.asarray(perm, dtype=np.int64)


def _core_order(n: int, m: int, vertex_order: np.ndarray | None) -> np.ndarray:
    # (u_v, w_v) pairs in vertex order, then the point-constraint rows
    if vertex_order is None:
        return np.arange(m)
    pairs = np.column_stack([vertex_order, vertex_order + n]).ravel()
    return np.concatenate([pairs, np.arange(2 * n, m)])


def _pivot_stats(lu) -> tuple[float, int, float]:
    pivots = np.abs(lu.U.diagonal())
    k = int(np.argmin(pivots))
    return float(pivots[k]), k, float(pivots.max())


def _diagnostics(A, x, rhs, min_pivot, k, max_pivot, method):
    res = np.linalg.norm(A @ x - rhs)
    scale = np.linalg.norm(rhs) + abs(A).max() * np.linalg.norm(x)
    return {
        "size": A.shape[0],
        "residual": float(res),
        "relative_residual": float(res / scale) if scale > 0 else 0.0,
        "min_pivot": min_pivot,
        "min_pivot_index": k,
        "max_pivot": max_pivot,
        "method": method,
    }


def _monolithic(A, rhs):
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise SingularSystemError(f"singular block system: {exc}") from exc
    lo, k, hi = _pivot_stats(lu)
    if lo == 0.0:
        raise SingularSystemError(f"zero pivot at position {k}", pivot_index=k)
    x = lu.solve(rhs)
    return x, (lo, k, hi)


def _bordered(A, rhs, n_border, order):
    """Factor the sparse core once and eliminate the dense border rows.

    With A = [[A0, E], [E^T, 0]], solve A0 Y = E and A0 y = r0, then
    z = (E^T Y)^{-1} (E^T y - r1) and x0 = y - Y z.
    """
    m = A.shape[0] - n_border
    A0 = A[:m, :m][order][:, order].tocsc()
    lu = spla.splu(A0, permc_spec="NATURAL")
    lo, k, hi = _pivot_stats(lu)
    if not lo > 0.0:
        raise RuntimeError("zero pivot in core")
    E = A[:m, m:].toarray()[order]

    def solve(r):
        r0, r1 = r[:m][order], r[m:]
        y = lu.solve(r0)
        if n_border:
            z = np.linalg.solve(S, E.T @ y - r1)
            y = y - Y @ z
        else:
            z = np.zeros(0)
        x = np.empty(A.shape[0])
        x[order] = y
        x[m:] = z
        return x

    if n_border:
        Y = lu.solve(E)
        S = E.T @ Y
        if np.linalg.cond(S) > 1e14:
            raise RuntimeError("singular border complement")
    x = solve(rhs)
    x = x + solve(rhs - A @ x)  # one step of iterative refinement
    return x, (lo, int(order[k]), hi)


def factorize_and_solve(
    A: sp.csc_matrix,
    rhs: np.ndarray,
    n_border: int = 0,
    vertex_order: np.ndarray | None = None,
    n_vertex: int | None = None,
):
    """Sparse LU solve of the block system; returns (solution, diagnostics).

    The last ``n_border`` rows (the mean-value constraints) are eliminated
    through a small Schur complement so the sparse core keeps its
    fill-reducing order.  If the core turns out singular the whole system is
    refactored in one piece.
    """
    method = "bordered"
    if vertex_order is not None and n_vertex is not None:
        order = _core_order(n_vertex, A.shape[0] - n_border, vertex_order)
    else:
        order = np.arange(A.shape[0] - n_border)
    try:
        x, stats = _bordered(A, rhs, n_border, order)
    except (RuntimeError, np.linalg.LinAlgError):
        method = "monolithic"
        x, stats = _monolithic(A, rhs)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("non-finite solution", pivot_index=stats[1])
    return x, _diagnostics(A, x, rhs, *stats, method)


def _solve(forms: AssembledForms, space: FESpace, F, G, config: SaddleConfig) -> SolutionBundle:
    n_full = space.ndof
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    T_full = point_eval_matrix(space, config.points) if config.num_points else sp.csr_matrix((0, n_full))
    a_full = mean_vector(space, forms.M)
    if config.dirichlet:
        if not space.dirichlet:
            raise ValueError("dirichlet config requires a space with Dirichlet mask")
        C, B, M, T, F_, G_, idx = _restrict(forms, space, F, G, T_full)
        a = a_full[idx]
        if T.nnz != T_full.nnz:
            raise ValueError("constraint point on the Dirichlet boundary")
    else:
        C, B, M, T, F_, G_ = forms.C, forms.B, forms.Mw, T_full, F, G
        idx = np.arange(n_full)
        a = a_full
    A, rhs = assemble_block_system(C, B, M, T, a, F_, G_, config)
    n = len(idx)
    n_border = int(config.mean_constraint_u) + int(config.mean_constraint_w)
    order = nested_dissection_order(C)
    x, diag = factorize_and_solve(A, rhs, n_border, order, n)
    u = np.zeros(n_full)
    w = np.zeros(n_full)
    u[idx] = x[:n]
    w[idx] = x[n : 2 * n]
    pos = 2 * n
    bundle = SolutionBundle(FEFunction(space, u), FEFunction(space, w), diagnostics=diag)
    if config.mode == "lagrange":
        bundle.lam = x[pos : pos + config.num_points].copy()
        pos += config.num_points
    if config.mean_constraint_u:
        bundle.p_bar = float(x[pos])
        pos += 1
    if config.mean_constraint_w:
        bundle.q_bar = float(x[pos])
        pos += 1
    if config.mode == "penalty" and config.num_points:
        bundle.multiplier_recovery = (
            config.penalty_weight * (T_full @ u - config.targets) / config.epsilon
        )
    diag["constraint_violation"] = (
        float(np.max(np.abs(T_full @ u - config.targets))) if config.num_points else 0.0
    )
    diag["mean_u"] = float(a_full @ u)
    diag["mean_w"] = float(a_full @ w)
    return bundle


def solve_lagrange(forms: AssembledForms, space: FESpace, F, G, config: SaddleConfig) -> SolutionBundle:
    """Hard point constraints through Lagrange multipliers."""
    if config.mode != "lagrange":
        config = config.with_mode("lagrange")
    return _solve(forms, space, F, G, config)


def solve_penalty(forms: AssembledForms, space: FESpace, F, G, config: SaddleConfig) -> SolutionBundle:
    """Point constraints enforced by the quadratic penalty ``|Tu - Z|^2 / (2 eps)``.

    The multiplier estimate ``(T u - Z) / eps`` is stored in
    ``multiplier_recovery``.  A ``penalty_weight`` other than 1 multiplies
    both the penalty and the recovered multiplier.
    """
    if config.mode != "penalty":
        raise ValueError("solve_penalty needs a penalty-mode config")
    return _solve(forms, space, F, G, config)
