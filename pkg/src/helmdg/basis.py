"""Polynomial bases on the reference triangle and reference edge.

* an L2-orthonormal modal (Koornwinder-type) scalar basis with gradient and
  Hessian evaluation, used for the broken DG space and local projections;
* shifted Legendre polynomials on [0, 1] (orthonormal w.r.t. dt), used for
  edge traces and edge projections;
* a continuous hierarchical basis (vertex / edge / bubble split) used by the
  patch potential reconstruction.

The reference triangle is {x >= 0, y >= 0, x + y <= 1} with vertices
v0=(0,0), v1=(1,0), v2=(0,1).  Local edge i is the edge opposite vertex i.
"""

from functools import lru_cache

import numpy as np
from scipy.special import eval_jacobi

from .quadrature import triangle_rule

# reference edge parametrizations: edge i runs counterclockwise,
# edge0: v1->v2, edge1: v2->v0, edge2: v0->v1
REF_EDGE_START = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
REF_EDGE_END = np.array([[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]])
REF_EDGE_LEN = np.array([np.sqrt(2.0), 1.0, 1.0])
REF_EDGE_NORMAL = np.array([[np.sqrt(0.5), np.sqrt(0.5)], [-1.0, 0.0], [0.0, -1.0]])
# local vertex pair (sorted) of edge i = edge opposite vertex i
LOCAL_EDGE_PAIRS = ((1, 2), (0, 2), (0, 1))


def ref_edge_points(ledge: int, t: np.ndarray) -> np.ndarray:
    """Map edge parameters t in [0,1] to reference-triangle coordinates."""
    a = REF_EDGE_START[ledge]
    b = REF_EDGE_END[ledge]
    return a[None, :] + np.outer(t, b - a)


def scalar_dim(p: int) -> int:
    return (p + 1) * (p + 2) // 2


def _scaled_legendre(zeta: np.ndarray, s: np.ndarray, imax: int, nderiv: int):
    """p_i = P_i(zeta/s) * s^i via the homogenized three-term recurrence.

    Returns value/derivative arrays indexed [i]; zeta = 2x + y - 1, s = 1 - y.
    Derivative bookkeeping uses zeta_x=2, zeta_y=1, s_x=0, s_y=-1.
    """
    n = zeta.shape[0]
    P = np.zeros((imax + 1, n))
    P[0] = 1.0
    if imax >= 1:
        P[1] = zeta
    out = {"v": P}
    if nderiv >= 1:
        Px = np.zeros_like(P)
        Py = np.zeros_like(P)
        if imax >= 1:
            Px[1] = 2.0
            Py[1] = 1.0
        out["x"], out["y"] = Px, Py
    if nderiv >= 2:
        Pxx = np.zeros_like(P)
        Pxy = np.zeros_like(P)
        Pyy = np.zeros_like(P)
        out["xx"], out["xy"], out["yy"] = Pxx, Pxy, Pyy
    s2 = s * s
    for i in range(1, imax):
        a = (2 * i + 1) / (i + 1)
        b = i / (i + 1)
        P[i + 1] = a * zeta * P[i] - b * s2 * P[i - 1]
        if nderiv >= 1:
            Px[i + 1] = a * (2.0 * P[i] + zeta * Px[i]) - b * s2 * Px[i - 1]
            Py[i + 1] = a * (P[i] + zeta * Py[i]) - b * (
                -2.0 * s * P[i - 1] + s2 * Py[i - 1]
            )
        if nderiv >= 2:
            Pxx[i + 1] = a * (4.0 * Px[i] + zeta * Pxx[i]) - b * s2 * Pxx[i - 1]
            Pxy[i + 1] = a * (2.0 * Py[i] + Px[i] + zeta * Pxy[i]) - b * (
                -2.0 * s * Px[i - 1] + s2 * Pxy[i - 1]
            )
            Pyy[i + 1] = a * (2.0 * Py[i] + zeta * Pyy[i]) - b * (
                2.0 * P[i - 1] - 4.0 * s * Py[i - 1] + s2 * Pyy[i - 1]
            )
    return out


def _jacobi_table(alpha: int, jmax: int, b: np.ndarray, nderiv: int):
    """Values/derivatives (w.r.t. b) of P_j^(alpha,0)(b) for j = 0..jmax."""
    n = b.shape[0]
    V = np.zeros((jmax + 1, n))
    D1 = np.zeros_like(V)
    D2 = np.zeros_like(V)
    for j in range(jmax + 1):
        V[j] = eval_jacobi(j, alpha, 0.0, b)
        if nderiv >= 1 and j >= 1:
            D1[j] = 0.5 * (j + alpha + 1) * eval_jacobi(j - 1, alpha + 1, 1.0, b)
        if nderiv >= 2 and j >= 2:
            D2[j] = 0.25 * (j + alpha + 1) * (j + alpha + 2) * eval_jacobi(
                j - 2, alpha + 2, 2.0, b
            )
    return V, D1, D2


class ScalarBasis:
    """Orthonormal modal basis of P_p on the reference triangle."""

    def __init__(self, p: int):
        if p < 0:
            raise ValueError("degree must be nonnegative")
        self.p = p
        self.ndof = scalar_dim(p)
        self.index = [(i, j) for n in range(p + 1) for i in range(n + 1) for j in [n - i]]
        rule = triangle_rule(2 * p + 2)
        raw = self._tabulate(rule.points, nderiv=0)["v"]
        norms2 = rule.weights @ (raw * raw)
        self.scale = 1.0 / np.sqrt(norms2)

    def _tabulate(self, pts: np.ndarray, nderiv: int):
        x = pts[:, 0]
        y = pts[:, 1]
        zeta = 2.0 * x + y - 1.0
        s = 1.0 - y
        b = 2.0 * y - 1.0
        leg = _scaled_legendre(zeta, s, self.p, nderiv)
        jt = {i: _jacobi_table(2 * i + 1, self.p - i, b, nderiv) for i in range(self.p + 1)}
        n = pts.shape[0]
        out = {"v": np.empty((n, self.ndof))}
        if nderiv >= 1:
            out["g"] = np.empty((n, self.ndof, 2))
        if nderiv >= 2:
            out["h"] = np.empty((n, self.ndof, 3))
        for m, (i, j) in enumerate(self.index):
            Q, Qb, Qbb = jt[i][0][j], jt[i][1][j], jt[i][2][j]
            pi = leg["v"][i]
            out["v"][:, m] = pi * Q
            if nderiv >= 1:
                px, py = leg["x"][i], leg["y"][i]
                out["g"][:, m, 0] = px * Q
                out["g"][:, m, 1] = py * Q + pi * (2.0 * Qb)
            if nderiv >= 2:
                pxx, pxy, pyy = leg["xx"][i], leg["xy"][i], leg["yy"][i]
                out["h"][:, m, 0] = pxx * Q
                out["h"][:, m, 1] = pxy * Q + px * (2.0 * Qb)
                out["h"][:, m, 2] = pyy * Q + 2.0 * py * (2.0 * Qb) + pi * (4.0 * Qbb)
        return out

    def eval(self, pts: np.ndarray) -> np.ndarray:
        return self._tabulate(pts, 0)["v"] * self.scale

    def eval_with_grad(self, pts: np.ndarray):
        t = self._tabulate(pts, 1)
        return t["v"] * self.scale, t["g"] * self.scale[None, :, None]

    def eval_all(self, pts: np.ndarray):
        t = self._tabulate(pts, 2)
        return (
            t["v"] * self.scale,
            t["g"] * self.scale[None, :, None],
            t["h"] * self.scale[None, :, None],
        )


@lru_cache(maxsize=None)
def scalar_basis(p: int) -> ScalarBasis:
    return ScalarBasis(p)


def edge_legendre(p: int, t: np.ndarray) -> np.ndarray:
    """L_r(t) = sqrt(2r+1) P_r(2t-1), orthonormal w.r.t. dt on [0,1]; (n, p+1)."""
    z = 2.0 * np.asarray(t, dtype=float) - 1.0
    out = np.empty((z.shape[0], p + 1))
    out[:, 0] = 1.0
    if p >= 1:
        out[:, 1] = z
    for r in range(1, p):
        out[:, r + 1] = ((2 * r + 1) * z * out[:, r] - r * out[:, r - 1]) / (r + 1)
    return out * np.sqrt(2.0 * np.arange(p + 1) + 1.0)


def project_edge_values(vals: np.ndarray, weights: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Coefficients of the L2(dt) projection from values at quadrature points."""
    return (weights * vals) @ L


def project_element_values(vals: np.ndarray, weights: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Coefficients in the orthonormal reference basis tabulated as V (n, ndof)."""
    return (weights * vals) @ V


# --------------------------------------------------------------------------
# continuous hierarchical basis for the patch potential problems
# --------------------------------------------------------------------------


class C0Basis:
    """Hierarchical C0 basis of P_q: 3 vertex + 3(q-1) edge + bubble modes.

    Edge modes use the kernel lam_a*lam_b*P_m^(2,2)(lam_b - lam_a) with the
    local vertex pair sorted; traces across elements match after applying the
    per-element orientation sign (-1)^m when the global node order of the edge
    is reversed relative to the sorted local pair.
    """

    def __init__(self, q: int):
        if q < 1:
            raise ValueError("C0 basis needs degree >= 1")
        self.q = q
        self.modes = [("v", v) for v in range(3)]
        for le in range(3):
            for m in range(q - 1):
                self.modes.append(("e", le, m))
        self.n_bubble = (q - 1) * (q - 2) // 2 if q >= 3 else 0
        for r in range(self.n_bubble):
            self.modes.append(("b", r))
        self.ndof = len(self.modes)
        assert self.ndof == scalar_dim(q)

    def eval_with_grad(self, pts: np.ndarray):
        n = pts.shape[0]
        x, y = pts[:, 0], pts[:, 1]
        lam = np.stack([1.0 - x - y, x, y], axis=1)
        dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        V = np.empty((n, self.ndof))
        G = np.empty((n, self.ndof, 2))
        if self.n_bubble:
            kb = scalar_basis(self.q - 3)
            KV, KG = kb.eval_with_grad(pts)
        for idx, mode in enumerate(self.modes):
            if mode[0] == "v":
                v = mode[1]
                V[:, idx] = lam[:, v]
                G[:, idx] = dlam[v]
            elif mode[0] == "e":
                _, le, m = mode
                a, b = LOCAL_EDGE_PAIRS[le]
                la, lb = lam[:, a], lam[:, b]
                arg = lb - la
                J = eval_jacobi(m, 2.0, 2.0, arg)
                dJ = (
                    0.5 * (m + 5) * eval_jacobi(m - 1, 3.0, 3.0, arg)
                    if m >= 1
                    else np.zeros(n)
                )
                V[:, idx] = la * lb * J
                darg = dlam[b] - dlam[a]
                G[:, idx] = (
                    (dlam[a][None, :] * lb[:, None] + dlam[b][None, :] * la[:, None]) * J[:, None]
                    + (la * lb * dJ)[:, None] * darg[None, :]
                )
            else:
                _, r = mode
                bub = lam[:, 0] * lam[:, 1] * lam[:, 2]
                dbub = (
                    dlam[0][None, :] * (lam[:, 1] * lam[:, 2])[:, None]
                    + dlam[1][None, :] * (lam[:, 0] * lam[:, 2])[:, None]
                    + dlam[2][None, :] * (lam[:, 0] * lam[:, 1])[:, None]
                )
                V[:, idx] = bub * KV[:, r]
                G[:, idx] = dbub * KV[:, r, None] + bub[:, None] * KG[:, r]
        return V, G


@lru_cache(maxsize=None)
def c0_basis(q: int) -> C0Basis:
    return C0Basis(q)
