"""Raviart-Thomas elements RT_p = [P_p]^2 + x * P~_p on the reference triangle.

The basis is built numerically but exactly within the space: a spanning set
(orthonormal scalar modes times unit vectors, plus x times the degree-p
scalar modes) is L2-orthonormalized, then split by the normal-trace map into

* edge functions: for each local edge l and each Legendre mode r, the
  minimal-L2-norm field whose normal trace is L_r on edge l (in the edge's
  dt-orthonormal Legendre basis) and zero on the other edges;
* interior functions: an orthonormal basis of the trace-free subspace.

Normal traces of the final basis are exact by construction (pinv/kernel of
the trace matrix), which makes H(div) patch assembly a pure index/sign game.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import REF_EDGE_LEN, REF_EDGE_NORMAL, edge_legendre, ref_edge_points, scalar_basis
from .quadrature import edge_rule, triangle_rule


def rt_dim(p: int) -> int:
    return (p + 1) * (p + 3)


@dataclass
class RTBasis:
    p: int
    dim: int
    n_edge: int  # 3 * (p + 1)
    n_interior: int  # p * (p + 1)
    transform: np.ndarray  # raw-to-final coefficient matrix
    gram_cond: float

    def _raw_eval(self, pts: np.ndarray):
        sb = scalar_basis(self.p)
        V, G = sb.eval_with_grad(pts)  # (n, ns), (n, ns, 2)
        n, ns = V.shape
        top = self._top_slice(ns)
        nraw = 2 * ns + (self.p + 1)
        vals = np.zeros((n, nraw, 2))
        divs = np.zeros((n, nraw))
        vals[:, :ns, 0] = V
        vals[:, ns : 2 * ns, 1] = V
        divs[:, :ns] = G[:, :, 0]
        divs[:, ns : 2 * ns] = G[:, :, 1]
        x = pts[:, 0:1]
        y = pts[:, 1:2]
        Vt = V[:, top]
        Gt = G[:, top, :]
        vals[:, 2 * ns :, 0] = x * Vt
        vals[:, 2 * ns :, 1] = y * Vt
        divs[:, 2 * ns :] = 2.0 * Vt + x * Gt[:, :, 0] + y * Gt[:, :, 1]
        return vals, divs

    def _top_slice(self, ns: int):
        # modes of total degree exactly p sit at the tail of the modal ordering
        return slice(ns - (self.p + 1), ns)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        vals, _ = self._raw_eval(pts)
        return np.einsum("nrc,rm->nmc", vals, self.transform)

    def div(self, pts: np.ndarray) -> np.ndarray:
        _, divs = self._raw_eval(pts)
        return divs @ self.transform

    def eval_with_div(self, pts: np.ndarray):
        vals, divs = self._raw_eval(pts)
        return (
            np.einsum("nrc,rm->nmc", vals, self.transform),
            divs @ self.transform,
        )

    def edge_dof(self, ledge: int, r: int) -> int:
        """Index of the basis function with trace L_r on local edge `ledge`."""
        return ledge * (self.p + 1) + r


def _build(p: int) -> RTBasis:
    if p < 1:
        raise ValueError("flux reconstruction uses RT degree >= 1")
    sb = scalar_basis(p)
    ns = sb.ndof
    nraw = 2 * ns + (p + 1)
    dummy = RTBasis(p, rt_dim(p), 3 * (p + 1), p * (p + 1), np.eye(nraw), 0.0)

    rule = triangle_rule(2 * p + 4)
    vals, _ = dummy._raw_eval(rule.points)
    gram = np.einsum("n,nrc,nsc->rs", rule.weights, vals, vals)
    evals, evecs = np.linalg.eigh(gram)
    cond = float(evals[-1] / evals[0])
    W = evecs @ np.diag(1.0 / np.sqrt(evals)) @ evecs.T  # symmetric orthonormalizer

    # normal-trace matrix in the per-edge dt-orthonormal Legendre basis
    er = edge_rule(2 * p + 4)
    L = edge_legendre(p, er.points)  # (nq, p+1)
    rows = []
    for ledge in range(3):
        pts = ref_edge_points(ledge, er.points)
        v, _ = dummy._raw_eval(pts)
        vn = v @ REF_EDGE_NORMAL[ledge]  # (nq, nraw)
        vn = vn * REF_EDGE_LEN[ledge]  # dof r = dt-coefficient of |e| * (v.n) on the edge
        rows.append(np.einsum("q,qr,qm->mr", er.weights, vn @ W, L))
    N = np.vstack(rows)  # (3(p+1), dim-in-O-coords=nraw)

    U, S, Vt = np.linalg.svd(N, full_matrices=True)
    n_edge = 3 * (p + 1)
    n_int = p * (p + 1)
    if S.min() <= 1e-8 * S.max():
        raise RuntimeError("RT trace map unexpectedly rank deficient")
    kernel = Vt[n_edge:, :].T  # (nraw, nraw - n_edge)
    # the raw span has dimension rt_dim(p); trace-free part of it has n_int dims
    # identify the kernel directions that lie inside RT_p: all of them do, since
    # the raw set spans exactly RT_p (dimension checked below)
    if kernel.shape[1] != nraw - n_edge:
        raise RuntimeError("unexpected kernel dimension")
    lift = Vt[:n_edge, :].T @ np.diag(1.0 / S) @ U.T  # pinv(N): (nraw, n_edge)
    C = np.hstack([lift, kernel])
    transform = W @ C
    if nraw != rt_dim(p):
        raise RuntimeError("raw RT span has wrong dimension")
    return RTBasis(p, rt_dim(p), n_edge, n_int, transform, cond)


@lru_cache(maxsize=None)
def rt_basis(p: int) -> RTBasis:
    return _build(p)
