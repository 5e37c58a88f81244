import numpy as np
import pytest

from helmdg.benchmarks import initial_discretization, square_hankel
from helmdg.estimator import trace_constants
from helmdg.field import DGField, interpolate
from helmdg.mesh import build_structured_mesh, edge_trace_values
from helmdg.quadrature import edge_rule, triangle_rule
from helmdg.reconstruction import (
    assemble_global_flux,
    assemble_global_potential,
    build_patch_data,
    oscillations,
    reconstruct,
    solve_patch_flux,
    solve_patch_potential,
)
from helmdg.solver import (
    DGParams,
    ProblemData,
    assemble,
    dg_gradient,
    edge_geometry,
    edge_order,
    solve,
    volume_order,
)
from helmdg.special import J1_FIRST_ROOT


@pytest.fixture(scope="module")
def hankel_setup():
    """Coarse square benchmark, solved once for the whole module."""
    case = square_hankel(k=5.0)
    mesh = build_structured_mesh((0, 0, 1, 1), 0.25)
    degrees = np.full(mesh.n_tris, 3)
    params = case.params()
    solution = solve(assemble(mesh, degrees, params, case.data))
    gradient = dg_gradient(solution, params)
    rec = reconstruct(solution, gradient, params, case.data)
    return case, mesh, degrees, params, solution, gradient, rec


def test_zero_problem_gives_zero_flux_and_potential():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 2)
    params = DGParams(k=3.0)
    data = ProblemData()
    solution = solve(assemble(mesh, degrees, params, data))
    gradient = dg_gradient(solution, params)
    rec = reconstruct(solution, gradient, params, data)
    rule = triangle_rule(6)
    for t in range(mesh.n_tris):
        assert np.max(np.abs(rec.flux.values(t, rule.points))) < 1e-14
        assert np.max(np.abs(rec.potential.values(t, rule.points))) < 1e-14


def test_compatibility_all_nodes(hankel_setup):
    case, mesh, degrees, params, solution, gradient, rec = hankel_setup
    for prob in rec.problems:
        assert prob.compat_residual <= 1e-9 * max(prob.compat_scale, 1e-30)


def test_interior_node_volume_mean_vanishes(hankel_setup):
    case, mesh, degrees, params, solution, gradient, rec = hankel_setup
    z = next(
        int(z)
        for z in np.nonzero(~mesh.node_boundary)[0]
        if not mesh.patch_of(int(z)).all_boundary_edges
    )
    prob = build_patch_data(solution, gradient, params, case.data, z)
    assert not prob.g_coeffs  # the patch does not touch the domain boundary
    # the orthonormal constant pressure mode evaluates to sqrt(2)
    total = abs(sum(prob.f_moments[t][0] for t in prob.patch.tris)) / np.sqrt(2.0)
    assert total <= 1e-9 * max(prob.compat_scale, 1e-30)


def test_patch_div_residual(hankel_setup):
    *_, rec = hankel_setup
    assert rec.max_div_residual <= 1e-9


def test_equilibration_element_moments(hankel_setup):
    """Element identity of the global flux against the full test space."""
    case, mesh, degrees, params, solution, gradient, rec = hankel_setup
    k = params.k
    scale = 0.0
    worst = 0.0
    for t in range(mesh.n_tris):
        p = int(degrees[t])
        order = max(volume_order(p, case.data), 2 * rec.flux.max_degree(t) + 4)
        rule = triangle_rule(order)
        uv = solution.eval_q(t, order)
        dv = rec.flux.div_q(t, order)
        w = mesh.detB[t] * rule.weights
        worst = max(worst, abs(w @ (k * k * uv - dv)))
        scale += float(w @ np.abs(k * k * uv))
    assert worst <= 1e-9 * scale


def test_equilibration_boundary_moments(hankel_setup):
    case, mesh, degrees, params, solution, gradient, rec = hankel_setup
    k = params.k
    hE, pE = edge_trace_values(mesh, degrees)
    worst = 0.0
    scale = 0.0
    for e in np.nonzero(mesh.edge_boundary)[0]:
        t = int(mesh.edge_tris[e, 0])
        order = edge_order(pE[e])
        geo = edge_geometry(mesh, e, degrees, order)
        V, Dn = geo.tabs[0]
        c = solution.block(t)
        uv, dnu = V @ c, Dn @ c
        gv = case.data.g(geo.points, geo.n_plus)
        common = gv - dnu + 1j * k * uv
        sn = rec.flux.normal_trace(t, e, edge_rule(order).points)
        mis = sn + gv + 1j * k * uv - params.gamma * k * (hE[e] / pE[e]) * common
        worst = max(worst, abs(geo.weights @ mis))
        scale += float(geo.weights @ np.abs(gv))
    assert worst <= 1e-9 * scale


def test_flux_normal_trace_continuity(hankel_setup):
    case, mesh, degrees, params, solution, gradient, rec = hankel_setup
    ts = edge_rule(24).points
    for e in np.nonzero(~mesh.edge_boundary)[0]:
        t0, t1 = (int(v) for v in mesh.edge_tris[e])
        s0 = rec.flux.normal_trace(t0, e, ts)
        s1 = rec.flux.normal_trace(t1, e, ts)
        jump = np.sqrt(np.mean(np.abs(s0 + s1) ** 2)) * np.sqrt(mesh.edge_len[e])
        assert jump <= 1e-9


def test_boundary_trace_matches_projected_datum(hankel_setup):
    case, mesh, degrees, params, solution, gradient, rec = hankel_setup
    z = int(np.nonzero(mesh.node_boundary)[0][0])
    prob = build_patch_data(solution, gradient, params, case.data, z)
    pf = solve_patch_flux(prob, gradient, case.data)
    from helmdg.basis import edge_legendre

    for e, coeffs in prob.g_coeffs.items():
        t = next(t for t in prob.patch.tris if e in set(mesh.tri_edges[t]))
        flux = assemble_global_flux(mesh, [pf])
        ts = edge_rule(20).points
        sn = flux.normal_trace(t, e, ts)
        target = edge_legendre(prob.p_z, ts) @ coeffs
        assert np.max(np.abs(sn - target)) <= 1e-10 * max(1.0, np.max(np.abs(target)))


def test_patch_order_independence(hankel_setup):
    case, mesh, degrees, params, solution, gradient, rec = hankel_setup
    rng = np.random.default_rng(0)
    shuffled = list(rec.patch_fluxes)
    rng.shuffle(shuffled)
    f1 = assemble_global_flux(mesh, rec.patch_fluxes)
    f2 = assemble_global_flux(mesh, shuffled)
    rule = triangle_rule(8)
    for t in range(0, mesh.n_tris, 7):
        v1 = f1.values(t, rule.points)
        v2 = f2.values(t, rule.points)
        assert np.max(np.abs(v1 - v2)) <= 1e-12 * max(1.0, np.max(np.abs(v1)))


def test_potential_zero_for_zero_field():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 2)
    solution = DGField.zeros(mesh, degrees)
    pp = solve_patch_potential(solution, 4)
    assert abs(pp.vert) < 1e-14
    assert all(np.max(np.abs(v)) < 1e-14 for v in pp.edge_modes.values() if len(v))


def test_potential_reproduces_continuous_polynomial():
    """For continuous u of matching degree, psi_z u lies in the local space,
    so the minimizer is exact and the summed potential equals u up to the
    mean shift."""
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 2)
    params = DGParams(k=2.0)

    def u_poly(pts):
        return pts[:, 0] ** 2 + 0.3 * pts[:, 0] * pts[:, 1] - pts[:, 1]

    ui = interpolate(mesh, degrees, u_poly)
    pots = [solve_patch_potential(ui, z) for z in range(mesh.n_nodes)]
    pot = assemble_global_potential(mesh, pots)
    grad = dg_gradient(ui, params)
    err = 0.0
    for t in range(mesh.n_tris):
        order = 2 * int(pot.tri_q[t]) + 2
        rule = triangle_rule(order)
        gv = grad.values_q(t, order)
        pv = pot.gradients_q(t, order)
        err += mesh.detB[t] * (rule.weights @ np.sum(np.abs(gv - pv) ** 2, axis=1))
    assert np.sqrt(err) <= 1e-9
    assert abs(pot.mean()) <= 1e-10


def test_potential_mean_zero(hankel_setup):
    *_, rec = hankel_setup
    norm = np.sqrt(np.mean(np.abs(rec.potential.vert) ** 2)) + 1e-30
    assert abs(rec.potential.mean()) <= 1e-10 * max(1.0, norm)


def test_potential_optimality_residual(hankel_setup):
    case, mesh, degrees, params, solution, gradient, rec = hankel_setup
    for pp in rec.patch_potentials[::5]:
        assert pp.optimality_residual <= 1e-10


def test_oscillations_zero_data():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 1)
    params = DGParams(k=2.0)
    data = ProblemData()
    solution = solve(assemble(mesh, degrees, params, data))
    gradient = dg_gradient(solution, params)
    rec = reconstruct(solution, gradient, params, data)
    osc = oscillations(rec.problems, mesh, J1_FIRST_ROOT, trace_constants(mesh))
    assert osc.osc_f == 0.0
    assert osc.osc_g == 0.0


def test_oscillation_f_vanishes_for_captured_degrees(hankel_setup):
    """With f = 0 the volume datum is polynomial of degree p+1 = p_z."""
    case, mesh, degrees, params, solution, gradient, rec = hankel_setup
    osc = oscillations(rec.problems, mesh, J1_FIRST_ROOT, trace_constants(mesh))
    scale = np.sqrt(sum(sum(p.f_sq.values()) for p in rec.problems))
    assert osc.osc_f <= 1e-8 * max(scale, 1e-30)
    assert osc.osc_g > 0.0  # the Hankel boundary datum is not polynomial


def test_compatibility_guard_trips_on_wrong_convention(hankel_setup):
    case, mesh, degrees, params, solution, gradient, rec = hankel_setup
    z = int(np.nonzero(mesh.node_boundary)[0][0])
    with pytest.raises(RuntimeError):
        build_patch_data(
            solution, gradient, params, case.data, z, convention=-1, compat_tol=1e-7
        )
