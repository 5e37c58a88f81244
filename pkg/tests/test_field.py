import numpy as np
import pytest

from helmdg.field import DGField, interpolate, total_dof
from helmdg.mesh import build_structured_mesh
from helmdg.tables import HAT_GRADS, hat_edge_tab, hat_vol_tab


def test_zeros_layout():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.array([1, 2, 3, 1, 2, 3, 1, 2])
    f = DGField.zeros(mesh, degrees)
    sizes = (degrees + 1) * (degrees + 2) // 2
    assert f.n_dof == sizes.sum() == total_dof(degrees)
    assert f.block(3).shape == (3,)


def test_rejects_degree_zero():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    with pytest.raises(ValueError):
        DGField.zeros(mesh, np.zeros(mesh.n_tris, dtype=int))


def test_interpolate_reproduces_polynomials_exactly():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 2)

    def u(pts):
        return 1.0 + pts[:, 0] - 2j * pts[:, 1] ** 2

    f = interpolate(mesh, degrees, u)
    pts = np.array([[0.2, 0.3], [0.1, 0.05], [0.4, 0.55]])
    for t in range(mesh.n_tris):
        phys = mesh.map_to_physical(t, pts)
        assert np.max(np.abs(f.eval(t, pts) - u(phys))) < 1e-13


def test_eval_grad_consistency():
    mesh = build_structured_mesh((0, 0, 1, 1), 0.5)
    degrees = np.full(mesh.n_tris, 3)
    f = interpolate(mesh, degrees, lambda p: p[:, 0] ** 2 * p[:, 1])
    pts = np.array([[0.25, 0.25]])
    for t in range(mesh.n_tris):
        phys = mesh.map_to_physical(t, pts)
        g = f.eval_grad(t, pts)[0]
        expected = np.array([2 * phys[0, 0] * phys[0, 1], phys[0, 0] ** 2])
        assert np.max(np.abs(g - expected)) < 1e-12


def test_hat_partition_of_unity_tables():
    """sum_z psi_z = 1 on elements and edges; sum_z grad psi_z = 0."""
    lam = hat_vol_tab(8)
    assert np.max(np.abs(lam.sum(axis=1) - 1.0)) < 1e-14
    assert np.max(np.abs(HAT_GRADS.sum(axis=0))) == 0.0
    for ledge in range(3):
        for flip in (False, True):
            lam_e = hat_edge_tab(ledge, flip, 8)
            assert np.max(np.abs(lam_e.sum(axis=1) - 1.0)) < 1e-14
            # the vertex opposite the edge contributes nothing on it
            assert np.max(np.abs(lam_e[:, ledge])) < 1e-14
