import numpy as np
import pytest

from membrane_split.assembly import (
    FEFunction, FESpace, ScalarField, assemble_forms, interpolate, point_eval_matrix,
)
from membrane_split.exceptions import ProbeSizeError
from membrane_split.mesh import build_disc_mesh, build_octasphere
from membrane_split.metrics import L2, fe_error_norm
from membrane_split.probes import (
    MAX_PROBE_DOFS,
    ProbeReport,
    coercivity_probe,
    kernel_infsup_probe,
    residual_probe,
    residual_vectors,
    ritz_projection,
    saddle_infsup_probe,
    spd_forms,
)
from membrane_split.problems import ExactProblem


def x3():
    return ScalarField(lambda x: x[..., 2], lambda x: np.eye(3)[2] - x[..., 2][..., None] * x)


def test_ritz_idempotent_and_exact_on_discrete(octa2):
    V, _ = octa2
    P = ritz_projection(V, x3())
    again = ritz_projection(V, P)
    assert np.max(np.abs(again.coefficients - P.coefficients)) < 1e-12


def test_ritz_reproduces_linear_on_flat_mesh():
    V = FESpace(build_disc_mesh(1))
    lin = ScalarField(lambda x: 2 - x[..., 0] + 3 * x[..., 1],
                      lambda x: np.broadcast_to([-1.0, 3.0, 0.0], x.shape))
    P = ritz_projection(V, lin)
    assert np.allclose(P.coefficients, interpolate(V, lin).coefficients, atol=1e-12)


def test_ritz_l2_convergence():
    errs = []
    for k in (1, 2, 3):
        V = FESpace(build_octasphere(k))
        errs.append(fe_error_norm(V, ritz_projection(V, x3()), x3(), L2)[0])
    assert all(a / b >= 3 for a, b in zip(errs, errs[1:]))


def test_coercivity_spd_case(octa2, sphere):
    V, forms = octa2
    T = point_eval_matrix(V, sphere.points)
    # with c = b the quadratic form dominates m, so mu >= 1
    assert coercivity_probe(V, spd_forms(forms), T, 0.01) >= 1 - 1e-10


def test_coercivity_positive_with_experiment_forms(octa2, sphere):
    V, forms = octa2
    T = point_eval_matrix(V, sphere.points)
    assert coercivity_probe(V, forms, T, 0.01) > 0


def test_coercivity_rejects_bad_epsilon(octa2, sphere):
    V, forms = octa2
    with pytest.raises(ValueError):
        coercivity_probe(V, forms, point_eval_matrix(V, sphere.points), 0.0)


def test_kernel_infsup_depends_only_on_constraint_kernel(octa2, sphere):
    V, forms = octa2
    T = point_eval_matrix(V, sphere.points)
    base = kernel_infsup_probe(V, forms, T)
    D = np.diag([2.0, -1.0, 0.5, 3.0, 1.0, 7.0])
    assert kernel_infsup_probe(V, forms, D @ T.toarray()) == pytest.approx(base, rel=1e-9)
    assert saddle_infsup_probe(V, forms, T) > 0


def test_kernel_infsup_coplanar_degradation(sphere):
    V = FESpace(build_octasphere(3))
    forms = assemble_forms(V, sphere.c_weights)
    six = kernel_infsup_probe(V, forms, point_eval_matrix(V, sphere.points))
    four = kernel_infsup_probe(V, forms, point_eval_matrix(V, sphere.points[:4]))
    assert six > 5 * four


def test_size_guard(monkeypatch, octa2, sphere):
    import membrane_split.probes as pr

    V, forms = octa2
    monkeypatch.setattr(pr, "MAX_PROBE_DOFS", 10)
    with pytest.raises(ProbeSizeError):
        pr.saddle_infsup_probe(V, forms, point_eval_matrix(V, sphere.points))
    assert MAX_PROBE_DOFS == 5000


def test_residual_vectors_wiring(flat):
    # shifting f by 1 shifts the u-residual by exactly the load of 1
    from dataclasses import replace
    from membrane_split.assembly import assemble_load

    V = FESpace(build_disc_mesh(1), dirichlet=True)
    r_u, r_w, keep = residual_vectors(V, flat)
    shifted = replace(flat, f=ScalarField(lambda x: flat.f.value(x) + 1.0, name="f+1"))
    r_u2, r_w2, keep2 = residual_vectors(V, shifted)
    assert np.array_equal(keep, keep2)
    assert np.allclose(r_u - r_u2, assemble_load(V, ScalarField.constant(1.0)), atol=1e-14)
    assert np.array_equal(r_w, r_w2)


def test_residual_excludes_singular_star(flat):
    V = FESpace(build_disc_mesh(1), dirichlet=True)
    _, _, keep = residual_vectors(V, flat)
    origin = V.mesh.constraint_vertices["origin"]
    assert origin not in keep
    assert not np.any(V.dirichlet_mask[keep])


def test_residual_decreases_under_refinement(flat):
    vals = [residual_probe(FESpace(build_disc_mesh(k), dirichlet=True), flat)["total"] for k in (1, 2, 3)]
    assert vals[0] > vals[1] > vals[2]


def test_residual_detects_wrong_multiplier(flat):
    from dataclasses import replace

    V = FESpace(build_disc_mesh(2), dirichlet=True)
    good = residual_probe(V, flat)["total"]
    bad = residual_probe(V, replace(flat, lambda_exact=np.zeros(5)))["total"]
    # the multiplier sits on an excluded row, so only rows away from it are judged
    assert bad == pytest.approx(good)
    wrong = residual_probe(V, replace(flat, lambda_exact=np.array([0, 5.0, 0, 0, 0])))["total"]
    assert wrong > 2 * good


def test_probe_report_line():
    r = ProbeReport("x", (1, 2), (0.5, 0.25), 0.5, True, "rule")
    assert r.line().startswith("PASS x: rule")
    assert "L1=5.000000e-01" in r.line()
