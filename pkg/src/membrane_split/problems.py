"""Manufactured data for the flat-disc and unit-sphere experiments."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly import ScalarField, flat_c_weights, sphere_c_weights, FormWeights
from .mesh import DISC_POINT_LABELS, SPHERE_POINT_LABELS

LOG2 = np.log(2.0)
# mean value of log(1 - x3) over the unit sphere
SPHERE_W_MEAN = LOG2 - 1.0


@dataclass(frozen=True)
class ExactProblem:
    name: str
    u: ScalarField
    w: ScalarField
    f: ScalarField
    g: ScalarField
    labels: tuple
    points: np.ndarray
    Z: np.ndarray
    lambda_exact: Optional[np.ndarray]
    c_weights: FormWeights
    w_unshifted: Optional[ScalarField] = None
    p_bar_exact: float = 0.0
    q_bar_exact: float = 0.0


def _r2(x):
    return x[..., 0] ** 2 + x[..., 1] ** 2


def _flat_u(x):
    r2 = _r2(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = 1.0 - r2 + 0.5 * r2 * np.log(r2)
    return np.where(r2 == 0.0, 1.0, v)


def _flat_grad_u(x):
    r2 = _r2(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(r2 == 0.0, 0.0, np.log(r2) - 1.0)
    g = np.zeros(np.shape(x))
    g[..., 0] = s * x[..., 0]
    g[..., 1] = s * x[..., 1]
    return g


def _flat_w(x):
    r2 = _r2(x)
    with np.errstate(divide="ignore"):
        return -2.0 * np.log(r2) + _flat_u(x)


def _flat_grad_w(x):
    r2 = _r2(x)
    g = _flat_grad_u(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        g[..., 0] -= 4.0 * x[..., 0] / r2
        g[..., 1] -= 4.0 * x[..., 1] / r2
    return g


def _zero(x):
    return np.zeros(np.shape(x)[:-1])


def _zero_grad(x):
    return np.zeros(np.shape(x))


def flat_problem() -> ExactProblem:
    """Biharmonic problem on the unit disc with five point constraints.

    u = 1 - r^2 + (r^2/2) log r^2, w = -Lap u + u = -2 log r^2 + u, f = g = 0.
    The only nonzero multiplier sits at the origin, where Bilap u = 8 pi delta.
    """
    u = ScalarField(_flat_u, _flat_grad_u, name="flat_u")
    w = ScalarField(_flat_w, _flat_grad_w, singular_points=((0.0, 0.0, 0.0),), name="flat_w")
    zero = ScalarField(_zero, _zero_grad, name="zero")
    points = np.array([[0, 0, 0], [0.5, 0, 0], [-0.5, 0, 0], [0, 0.5, 0], [0, -0.5, 0]], float)
    Z = _flat_u(points)
    lam = np.array([-8.0 * np.pi, 0.0, 0.0, 0.0, 0.0])
    return ExactProblem(
        name="flat",
        u=u,
        w=w,
        f=zero,
        g=zero,
        labels=DISC_POINT_LABELS,
        points=points,
        Z=Z,
        lambda_exact=lam,
        c_weights=flat_c_weights(kappa=1.0, sigma=0.0),
    )


def _zonal(F, dF):
    """Field depending on x3 only, with surface gradient on the unit sphere."""

    def value(x):
        return F(x[..., 2])

    def gradient(x):
        t = x[..., 2]
        d = dF(t)
        g = -(d * t)[..., None] * x
        g[..., 2] += d
        return g

    return value, gradient


def _log1m(t):
    with np.errstate(divide="ignore"):
        return np.log1p(-t)


def _U(t):
    s = 1.0 - t
    with np.errstate(divide="ignore", invalid="ignore"):
        v = s * np.log(s)
    return np.where(s == 0.0, 0.0, v) - 0.5 * (np.log(4.0) - 1.0)


def _dU(t):
    return -_log1m(t) - 1.0


def sphere_problem(shift_w: bool = True) -> ExactProblem:
    """Point-constrained membrane on the unit sphere (kappa = sigma = R = 1).

    With both mean constraints active the exact solution is u = U and
    w = log(1 - x3) - (log 2 - 1), with p_bar = log 2 - 1 and
    q_bar = -(log 2 - 1).  The only nonzero multiplier sits at the north
    pole: -Lap_G log(1 - x3) carries a point mass -4 pi there.
    """
    north = ((0.0, 0.0, 1.0),)
    u = ScalarField(*_zonal(_U, _dU), singular_points=(), name="sphere_u")
    dw = lambda t: -1.0 / (1.0 - t)  # noqa: E731
    w_raw = ScalarField(*_zonal(_log1m, dw), singular_points=north, name="sphere_w_unshifted")
    w_shift = ScalarField(
        *_zonal(lambda t: _log1m(t) - SPHERE_W_MEAN, dw),
        singular_points=north,
        name="sphere_w",
    )
    log4 = np.log(4.0)
    f = ScalarField(
        *_zonal(
            lambda t: 9 * t * _log1m(t) + 9 * t - 2 * _log1m(t) + 0.5 * (5 + 3 * log4),
            lambda t: 9 * _log1m(t) - 9 * t / (1 - t) + 9 + 2 / (1 - t),
        ),
        singular_points=north,
        name="sphere_f",
    )
    g = ScalarField(
        *_zonal(
            lambda t: -3 * t * _log1m(t) - 3 * t - 0.5 * (log4 + 1),
            lambda t: -3 * _log1m(t) + 3 * t / (1 - t) - 3,
        ),
        singular_points=north,
        name="sphere_g",
    )
    points = np.array(
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float
    )
    Z = u.value(points)
    lam = np.zeros(6)
    lam[SPHERE_POINT_LABELS.index("+z")] = 4.0 * np.pi
    return ExactProblem(
        name="sphere",
        u=u,
        w=w_shift if shift_w else w_raw,
        f=f,
        g=g,
        labels=SPHERE_POINT_LABELS,
        points=points,
        Z=Z,
        lambda_exact=lam,
        c_weights=sphere_c_weights(kappa=1.0, sigma=1.0, R=1.0),
        w_unshifted=w_raw,
        p_bar_exact=SPHERE_W_MEAN if shift_w else 0.0,
        q_bar_exact=-SPHERE_W_MEAN if shift_w else 0.0,
    )


def exact_fields(problem: str) -> ExactProblem:
    if problem == "flat":
        return flat_problem()
    if problem == "sphere":
        return sphere_problem()
    raise ValueError(f"unknown problem {problem!r}")
