"""Symmetric quadrature rules on the reference triangle.

Points are given in barycentric coordinates and weights sum to one, so a
rule integrates over a physical triangle as ``area * sum(w * f(x_q))``.
All rules used here have strictly interior nodes with positive weights.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def _orbit3(a: float) -> list[tuple[float, float, float]]:
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _orbit6(a: float, b: float) -> list[tuple[float, float, float]]:
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _centroid_rule():
    return [(1 / 3, 1 / 3, 1 / 3)], [1.0]


def _degree2_rule():
    return _orbit3(1 / 6), [1 / 3] * 3


def _degree4_rule():
    # Dunavant, 6 points
    pts = _orbit3(0.445948490915965) + _orbit3(0.091576213509771)
    wts = [0.223381589678011] * 3 + [0.109951743655322] * 3
    return pts, wts


def _degree5_rule():
    # Radon, 7 points
    s15 = np.sqrt(15.0)
    a1 = (6.0 - s15) / 21.0
    a2 = (6.0 + s15) / 21.0
    w1 = (155.0 - s15) / 1200.0
    w2 = (155.0 + s15) / 1200.0
    pts = [(1 / 3, 1 / 3, 1 / 3)] + _orbit3(a1) + _orbit3(a2)
    wts = [9 / 40] + [w1] * 3 + [w2] * 3
    return pts, wts


def _degree6_rule():
    # Dunavant, 12 points
    pts = (
        _orbit3(0.249286745170910)
        + _orbit3(0.063089014491502)
        + _orbit6(0.053145049844817, 0.310352451033784)
    )
    wts = [0.116786275726379] * 3 + [0.050844906370207] * 3 + [0.082851075618374] * 6
    return pts, wts


_RULES = {
    1: _centroid_rule,
    2: _degree2_rule,
    3: _degree4_rule,
    4: _degree4_rule,
    5: _degree5_rule,
    6: _degree6_rule,
}


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(bary, weights)`` exact for polynomials up to ``degree``.

    ``bary`` has shape (nq, 3); ``weights`` has shape (nq,) and sums to 1.
    Degree 3 reuses the degree-4 rule to avoid negative weights.
    """
    if degree not in _RULES:
        raise ValueError(f"quadrature degree must be in 1..6, got {degree}")
    pts, wts = _RULES[degree]()
    bary = np.asarray(pts, dtype=float)
    weights = np.asarray(wts, dtype=float)
    weights = weights / weights.sum()
    bary.setflags(write=False)
    weights.setflags(write=False)
    return bary, weights


def physical_points(vertices: np.ndarray, triangles: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Quadrature points for every triangle, shape (ntri, nq, 3)."""
    corners = vertices[triangles]  # (ntri, 3, 3)
    return np.einsum("qk,tkd->tqd", bary, corners)
