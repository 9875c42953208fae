#!/usr/bin/env python3
"""Compare penalty-sweep EOCs at epsilon and at epsilon / 8 on the finest mesh.

The reference tables for this study match this solver's sweep when every
epsilon is divided by 8 (equivalently penalty_weight = 8).  The script
prints both sequences side by side so the shift can be inspected.
"""
from membrane_split.assembly import FESpace, assemble_forms
from membrane_split.experiments import error_row, solve_problem
from membrane_split.metrics import fill_eocs
from membrane_split.mesh import build_polar_sphere
from membrane_split.problems import sphere_problem


def sweep(weight: float, level: int = 5):
    prob = sphere_problem()
    mesh = build_polar_sphere(level)
    space = FESpace(mesh)
    forms = assemble_forms(space, prob.c_weights)
    rows = []
    for k in range(5):
        eps = 0.2 * 0.5**k
        res = solve_problem(prob, mesh, eps, penalty_weight=weight, space=space, forms=forms)
        rows.append(error_row(prob, res, 4, eps))
    fill_eocs(rows, by="epsilon")
    return rows


if __name__ == "__main__":
    for w in (1.0, 8.0):
        print(f"penalty_weight = {w:g}")
        for r in sweep(w):
            eocs = " ".join(f"{k}={v:.4f}" for k, v in r.eocs.items())
            print(f"  eps={r.epsilon:.5f} E_L2_u={r.errors['L2_u']:.4e} {eocs}")
