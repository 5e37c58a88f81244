import numpy as np
import pytest

from helmdg.benchmarks import ExactSolution, square_hankel
from helmdg.estimator import (
    estimate,
    estimate_residual,
    trace_constants,
    true_error,
)
from helmdg.field import interpolate
from helmdg.mesh import build_structured_mesh, refine, shape_regularity
from helmdg.reconstruction import oscillations, reconstruct
from helmdg.solver import DGParams, ProblemData, assemble, dg_gradient, solve
from helmdg.special import J1_FIRST_ROOT, bessel_j


@pytest.fixture(scope="module")
def hankel_estimated():
    case = square_hankel(k=5.0)
    mesh = build_structured_mesh((0, 0, 1, 1), 0.25)
    degrees = np.full(mesh.n_tris, 3)
    params = case.params()
    solution = solve(assemble(mesh, degrees, params, case.data))
    gradient = dg_gradient(solution, params)
    rec = reconstruct(solution, gradient, params, case.data)
    osc = oscillations(rec.problems, mesh, J1_FIRST_ROOT, trace_constants(mesh))
    report = estimate(
        solution, gradient, rec.flux, rec.potential, params, case.data, osc
    )
    err = true_error(solution, gradient, case.exact, params)
    return case, mesh, degrees, params, solution, gradient, rec, report, err


def test_poincare_root_constant():
    assert abs(bessel_j(1.0, J1_FIRST_ROOT)) <= 1e-10


def test_trace_constant_bounds():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    rng = np.random.default_rng(2)
    for _ in range(4):
        marked = rng.choice(mesh.n_tris, size=max(1, mesh.n_tris // 4), replace=False)
        mesh, _ = refine(mesh, marked, "nvb")
    ctr = trace_constants(mesh)
    # right-angled NVB meshes: h^2/|T| = 4, hence C_tr <= 1.14733
    assert abs(shape_regularity(mesh) - 4.0) < 1e-9
    assert np.all(ctr <= 1.14733)
    bound = np.sqrt(0.3291 * mesh.diam**2 / mesh.areas)
    assert np.all(ctr <= bound + 1e-12)


def test_zero_problem_zero_estimator():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 2)
    params = DGParams(k=2.0)
    data = ProblemData()
    solution = solve(assemble(mesh, degrees, params, data))
    gradient = dg_gradient(solution, params)
    rec = reconstruct(solution, gradient, params, data)
    report = estimate(solution, gradient, rec.flux, rec.potential, params, data)
    assert report.eta_total == 0.0
    assert np.all(estimate_residual(solution, params, data) == 0.0)


def test_grouping_identity(hankel_estimated):
    *_, report, err = hankel_estimated
    assert abs(report.regrouped_total() - report.eta_total) <= 1e-13 * report.eta_total


def test_efficiency_near_one_on_resolved_mesh(hankel_estimated):
    *_, report, err = hankel_estimated
    eff = report.eta_total / err.err_grad
    assert 0.8 <= eff <= 1.25


def test_element_indicator_is_contribution(hankel_estimated):
    *_, report, err = hankel_estimated
    first = report.flux_misfit + report.vol_residual + report.bnd_misfit
    expected = np.sqrt(first**2 + report.noncf**2)
    assert np.max(np.abs(expected - report.element_eta)) <= 1e-14


def test_true_error_exact_for_interpolated_polynomial():
    mesh = build_structured_mesh((0, 0, 1, 1), 1.0)
    degrees = np.full(mesh.n_tris, 2)
    params = DGParams(k=2.0)

    def u_poly(pts):
        return (1 + 2j) * pts[:, 0] * pts[:, 1]

    def grad_poly(pts):
        return np.stack([(1 + 2j) * pts[:, 1], (1 + 2j) * pts[:, 0]], axis=1)

    exact = ExactSolution(u_poly, grad_poly)
    ui = interpolate(mesh, degrees, u_poly)
    gradient = dg_gradient(ui, params)
    err = true_error(ui, gradient, exact, params)
    assert err.err_broken <= 1e-10
    assert err.err_l2 <= 1e-10
    assert err.err_bnd <= 1e-10
    assert err.err_grad <= 1e-10


def test_true_error_quadrature_stability(hankel_estimated):
    case, mesh, degrees, params, solution, gradient, *_ = hankel_estimated
    base = true_error(solution, gradient, case.exact, params)
    boosted = true_error(solution, gradient, case.exact, params, quad_boost=12)
    assert abs(boosted.err_grad - base.err_grad) <= 1e-3 * base.err_grad


def test_residual_estimator_jump_free_for_continuous_interpolant():
    """A global polynomial interpolates continuously, so only the volume
    residual and boundary misfit survive in the residual indicators."""
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 3)
    k = 2.0
    params = DGParams(k=k)

    def u_poly(pts):
        return pts[:, 0] ** 2 * pts[:, 1] - 0.5 * pts[:, 1] ** 3 + 0j

    ui = interpolate(mesh, degrees, u_poly)
    data = ProblemData(f=None, g=lambda pts, n: np.zeros(pts.shape[0], dtype=complex))
    eta_sq = estimate_residual(ui, params, data)
    from helmdg.mesh import edge_trace_values
    from helmdg.solver import edge_geometry, edge_order

    hE, pE = edge_trace_values(mesh, degrees)
    jump_total = 0.0
    for e in np.nonzero(~mesh.edge_boundary)[0]:
        geo = edge_geometry(mesh, e, degrees, edge_order(pE[e]))
        (V0, D0), (V1, D1) = geo.tabs
        t0, t1 = geo.tris
        jump_u = V0 @ ui.block(t0) - V1 @ ui.block(t1)
        jump_g = D0 @ ui.block(t0) - D1 @ ui.block(t1)
        jump_total += float(geo.weights @ (np.abs(jump_u) ** 2 + np.abs(jump_g) ** 2))
    assert jump_total <= 1e-24
    assert np.sum(eta_sq) > 1e-6  # the Helmholtz volume residual remains


def test_bnd_data_term_reported(hankel_estimated):
    *_, report, err = hankel_estimated
    assert report.bnd_data_term > 0
