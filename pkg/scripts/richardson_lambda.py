#!/usr/bin/env python3
"""Richardson extrapolation of the flat-disc multiplier at the origin.

Independent check of the exact multiplier -8 pi used in the error tables.
Solves levels 0-4, estimates the convergence order from three consecutive
levels and extrapolates the last pair.
"""
import math

from membrane_split.experiments import solve_problem
from membrane_split.mesh import build_disc_mesh
from membrane_split.problems import flat_problem


def origin_multipliers(levels=range(5)):
    prob = flat_problem()
    return [float(solve_problem(prob, build_disc_mesh(k)).bundle.lam[0]) for k in levels]


def richardson(values):
    a, b, c = values[-3:]
    ratio = (a - b) / (b - c)
    return c - (b - c) / (ratio - 1.0), math.log2(ratio)


if __name__ == "__main__":
    lam0 = origin_multipliers()
    for k, v in enumerate(lam0):
        print(f"level {k}: lambda_origin = {v:.8f}")
    est, order = richardson(lam0)
    exact = -8.0 * math.pi
    print(f"observed order {order:.3f}; extrapolated {est:.6f}; -8 pi = {exact:.6f}")
    print(f"relative deviation {abs(est - exact) / abs(exact):.2e}")
