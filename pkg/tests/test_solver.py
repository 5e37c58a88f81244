import numpy as np
import pytest

from helmdg.field import DGField, interpolate
from helmdg.mesh import build_structured_mesh, edge_trace_values
from helmdg.solver import (
    DGParams,
    ProblemData,
    assemble,
    dg_gradient,
    edge_geometry,
    edge_order,
    hat_orthogonality_residuals,
    lift_l0,
    lift_l1,
    solve,
)

K = 4.0
GRAD_AFFINE = np.array([2.0, 3.0j])


def u_affine(pts):
    return 1.0 + 2.0 * pts[:, 0] + 3.0j * pts[:, 1]


def affine_data():
    def f(pts):
        return -K * K * u_affine(pts)

    def g(pts, n):
        return GRAD_AFFINE @ n - 1j * K * u_affine(pts)

    return ProblemData(f=f, g=g)


@pytest.fixture(scope="module")
def affine_setup():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 2)
    params = DGParams(k=K)
    data = affine_data()
    system = assemble(mesh, degrees, params, data)
    solution = solve(system)
    return mesh, degrees, params, data, system, solution


def test_params_validation():
    with pytest.raises(ValueError):
        DGParams(k=1.0, gamma=0.4)
    with pytest.raises(ValueError):
        DGParams(k=-1.0)
    with pytest.raises(ValueError):
        DGParams(k=1.0, beta=0.0)


def test_zero_data_gives_zero_solution():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 1)
    system = assemble(mesh, degrees, DGParams(k=2.0), ProblemData())
    assert np.linalg.norm(system.b) == 0.0
    assert np.linalg.norm(solve(system).coeffs) == 0.0


def test_affine_solution_reproduced(affine_setup):
    mesh, degrees, params, data, system, solution = affine_setup
    ui = interpolate(mesh, degrees, u_affine)
    assert np.max(np.abs(solution.coeffs - ui.coeffs)) < 1e-11


def test_interpolant_has_small_discrete_residual(affine_setup):
    mesh, degrees, params, data, system, _ = affine_setup
    ui = interpolate(mesh, degrees, u_affine)
    r = system.A @ ui.coeffs - system.b
    assert np.linalg.norm(r) / np.linalg.norm(system.b) < 1e-10


def test_solve_residual_contract(affine_setup):
    *_, system, solution = affine_setup
    rel = np.linalg.norm(system.A @ solution.coeffs - system.b) / np.linalg.norm(
        system.b
    )
    assert rel <= 1e-10


def test_galerkin_consistency_random_tests(affine_setup):
    mesh, degrees, params, data, system, solution = affine_setup
    rng = np.random.default_rng(7)
    resid = system.A @ solution.coeffs - system.b
    for _ in range(10):
        w = rng.normal(size=solution.n_dof) + 1j * rng.normal(size=solution.n_dof)
        value = np.vdot(w, resid)  # a(u, w) - F(w) for the discrete pairing
        assert abs(value) <= 1e-9 * np.linalg.norm(system.b) * np.linalg.norm(w)


def test_nonstabilization_part_symmetric():
    mesh = build_structured_mesh((0, 0, 1, 1), 1.0)  # two elements
    degrees = np.full(mesh.n_tris, 2)
    A = assemble(mesh, degrees, DGParams(k=3.0), ProblemData()).A.toarray()
    assert np.max(np.abs(A.real - A.real.T)) <= 1e-12
    assert np.max(np.abs(A.imag - A.imag.T)) <= 1e-12  # stabilization is symmetric too


def test_lift_l0_zero_for_continuous_field(affine_setup):
    mesh, degrees, params, data, _, _ = affine_setup
    ui = interpolate(mesh, degrees, u_affine)
    e = int(np.nonzero(~mesh.edge_boundary)[0][0])
    vals = lift_l0(ui, e)
    assert max(np.max(np.abs(v)) for v in vals.values()) < 1e-12


def test_lift_l0_closed_form_constant_jump():
    mesh = build_structured_mesh((0, 0, 1, 1), 1.0)
    degrees = np.full(mesh.n_tris, 1)
    field = DGField.zeros(mesh, degrees)
    e = int(np.nonzero(~mesh.edge_boundary)[0][0])
    t0, t1 = mesh.edge_tris[e]
    c = 0.7
    field.block(int(t0))[0] = c / np.sqrt(2.0)  # constant mode evaluates to sqrt(2)
    n_plus = mesh.edge_normal(e, int(t0))
    vals = lift_l0(field, e)
    h_e = mesh.edge_len[e]
    for t in (int(t0), int(t1)):
        expected = h_e * c * n_plus / (2.0 * mesh.areas[t])
        assert np.max(np.abs(vals[t] - expected)) < 1e-12


def test_lift_l1_moment_equation():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 3)
    params = DGParams(k=K)
    rng = np.random.default_rng(1)
    field = DGField.zeros(mesh, degrees)
    field.coeffs[:] = rng.normal(size=field.n_dof) + 1j * rng.normal(size=field.n_dof)
    hE, pE = edge_trace_values(mesh, degrees)
    e = int(np.nonzero(~mesh.edge_boundary)[0][0])
    geo = edge_geometry(mesh, e, degrees, edge_order(pE[e]))
    (V0, D0), (V1, D1) = geo.tabs
    t0, t1 = geo.tris
    jump_int = geo.weights @ (D0 @ field.block(t0) - D1 @ field.block(t1))
    vals = lift_l1(field, e, params)
    # defining equation against a constant test field supported on one side
    for side, t in enumerate(geo.tris):
        tau = np.array([0.4, -1.1])
        lhs = mesh.areas[t] * (vals[t] @ tau)
        sign = 1.0 if side == 0 else -1.0
        rhs = 1j * params.beta * (hE[e] / pE[e]) * jump_int * sign * (geo.n_plus @ tau)
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_liftings_reject_boundary_edges(affine_setup):
    mesh, degrees, params, _, _, solution = affine_setup
    e = int(np.nonzero(mesh.edge_boundary)[0][0])
    with pytest.raises(ValueError):
        lift_l0(solution, e)
    with pytest.raises(ValueError):
        lift_l1(solution, e, params)


def test_dg_gradient_matches_bruteforce_lift_sum():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 2)
    params = DGParams(k=K)
    rng = np.random.default_rng(3)
    field = DGField.zeros(mesh, degrees)
    field.coeffs[:] = rng.normal(size=field.n_dof) + 1j * rng.normal(size=field.n_dof)
    grad = dg_gradient(field, params)
    corr = np.zeros((mesh.n_tris, 2), dtype=complex)
    for e in np.nonzero(~mesh.edge_boundary)[0]:
        for t, v in lift_l0(field, int(e)).items():
            corr[t] += v
        for t, v in lift_l1(field, int(e), params).items():
            corr[t] += v
    assert np.max(np.abs(corr - grad.corr)) < 1e-12


def test_dg_gradient_of_continuous_kinked_quadratic_keeps_only_l1():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 2)
    params = DGParams(k=K)

    def u_kink(pts):
        x = pts[:, 0]
        return np.where(x >= 0.5, x * (x - 0.5), 0.0)  # C0 but not C1 at x = 1/2

    ui = interpolate(mesh, degrees, u_kink)
    for e in np.nonzero(~mesh.edge_boundary)[0].tolist():
        l0 = lift_l0(ui, e)
        assert max(np.max(np.abs(v)) for v in l0.values()) < 1e-12
    grad = dg_gradient(ui, params)
    assert np.max(np.abs(grad.corr.real)) < 1e-12  # L1 carries the i*beta factor
    assert np.max(np.abs(grad.corr.imag)) > 1e-6  # normal-derivative jumps remain


def test_hat_orthogonality_solution_vs_perturbation(affine_setup):
    mesh, degrees, params, data, system, solution = affine_setup
    grad = dg_gradient(solution, params)
    res, scale = hat_orthogonality_residuals(solution, grad, params, data)
    rel = np.abs(res) / np.maximum(scale, 1e-30)
    assert np.max(rel) < 1e-9
    # an O(1) perturbation must produce a visible residual
    bad = DGField(mesh, degrees, solution.coeffs.copy(), solution.offsets)
    bad.coeffs[::7] += 1.0
    bad_grad = dg_gradient(bad, params)
    res_b, scale_b = hat_orthogonality_residuals(bad, bad_grad, params, data)
    assert np.max(np.abs(res_b) / np.maximum(scale_b, 1e-30)) > 1e-3


def test_hat_orthogonality_convention_contrast(affine_setup):
    mesh, degrees, params, data, _, solution = affine_setup
    grad = dg_gradient(solution, params)
    res_plus, scale = hat_orthogonality_residuals(solution, grad, params, data, convention=1)
    res_minus, _ = hat_orthogonality_residuals(solution, grad, params, data, convention=-1)
    boundary = mesh.node_boundary
    rel_plus = np.max(np.abs(res_plus[boundary]) / scale[boundary])
    rel_minus = np.max(np.abs(res_minus[boundary]) / scale[boundary])
    assert rel_minus > 1e6 * rel_plus


def test_refractive_index_enters_volume_and_boundary():
    mesh = build_structured_mesh((-1, -1, 1, 1), 0.5, force_even_y=True)
    degrees = np.full(mesh.n_tris, 1)

    def eps_fn(pts):
        return np.where(pts[:, 1] < 0, 4.0, 1.0)

    pa = DGParams(k=2.0, eps_fn=eps_fn)
    pb = DGParams(k=2.0)
    Aa = assemble(mesh, degrees, pa, ProblemData()).A
    Ab = assemble(mesh, degrees, pb, ProblemData()).A
    assert np.max(np.abs((Aa - Ab).toarray())) > 1e-8
