"""Cached reference-element tabulations shared by assembly and estimation."""

from functools import lru_cache

import numpy as np

from .basis import edge_legendre, ref_edge_points, scalar_basis, c0_basis
from .quadrature import edge_rule, triangle_rule
from .rt import rt_basis


@lru_cache(maxsize=None)
def vol_tab(p: int, order: int):
    """(V, G) of the degree-p scalar basis at the order-`order` triangle rule."""
    rule = triangle_rule(order)
    V, G = scalar_basis(p).eval_with_grad(rule.points)
    return V, G


@lru_cache(maxsize=None)
def vol_tab_hess(p: int, order: int):
    rule = triangle_rule(order)
    _, _, H = scalar_basis(p).eval_all(rule.points)
    return H


@lru_cache(maxsize=None)
def edge_tab(p: int, ledge: int, flip: bool, order: int):
    """(V, G) of the degree-p scalar basis at edge quadrature points.

    Points follow the edge's global parametrization; `flip` marks that the
    local counterclockwise traversal runs opposite to it.
    """
    t = edge_rule(order).points
    if flip:
        t = 1.0 - t
    pts = ref_edge_points(ledge, t)
    return scalar_basis(p).eval_with_grad(pts)


@lru_cache(maxsize=None)
def rt_vol_tab(p: int, order: int):
    rule = triangle_rule(order)
    return rt_basis(p).eval_with_div(rule.points)


@lru_cache(maxsize=None)
def rt_vol_flat(p: int, order: int):
    """(dim, nq*2) layout of the RT values for BLAS-friendly contractions."""
    vals, divs = rt_vol_tab(p, order)
    n, dim, _ = vals.shape
    return np.ascontiguousarray(vals.transpose(1, 0, 2).reshape(dim, n * 2)), divs


@lru_cache(maxsize=None)
def vol_grad_flat(p: int, order: int):
    """(ndof, nq*2) layout of the scalar gradients."""
    _, G = vol_tab(p, order)
    n, m, _ = G.shape
    return np.ascontiguousarray(G.transpose(1, 0, 2).reshape(m, n * 2))


@lru_cache(maxsize=None)
def c0_grad_flat(q: int, order: int):
    _, G = c0_vol_tab(q, order)
    n, m, _ = G.shape
    return np.ascontiguousarray(G.transpose(1, 0, 2).reshape(m, n * 2))


@lru_cache(maxsize=None)
def rt_edge_tab(p: int, ledge: int, flip: bool, order: int):
    t = edge_rule(order).points
    if flip:
        t = 1.0 - t
    pts = ref_edge_points(ledge, t)
    rt = rt_basis(p)
    vals, divs = rt.eval_with_div(pts)
    return vals, divs


@lru_cache(maxsize=None)
def c0_vol_tab(q: int, order: int):
    rule = triangle_rule(order)
    return c0_basis(q).eval_with_grad(rule.points)


@lru_cache(maxsize=None)
def edge_legendre_tab(p: int, order: int):
    return edge_legendre(p, edge_rule(order).points)


@lru_cache(maxsize=None)
def hat_edge_tab(ledge: int, flip: bool, order: int):
    """Barycentric (hat) values at edge quadrature points; (nq, 3)."""
    t = edge_rule(order).points
    if flip:
        t = 1.0 - t
    pts = ref_edge_points(ledge, t)
    x, y = pts[:, 0], pts[:, 1]
    return np.stack([1.0 - x - y, x, y], axis=1)


@lru_cache(maxsize=None)
def hat_vol_tab(order: int):
    rule = triangle_rule(order)
    x, y = rule.points[:, 0], rule.points[:, 1]
    return np.stack([1.0 - x - y, x, y], axis=1)


HAT_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
