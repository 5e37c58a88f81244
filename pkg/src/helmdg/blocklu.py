"""Block LU factorization on the element coupling graph.

The DG matrix is naturally block-sparse: one dense diagonal block per
element plus one off-diagonal block per interior edge.  Eliminating whole
element blocks in a nested-dissection order runs on dense BLAS kernels,
which outperforms a scalar sparse factorization by an order of magnitude at
the moderate element counts and high polynomial degrees of the hp runs.

Pivoting happens inside the diagonal blocks only (LAPACK getrf); callers
verify the final residual and fall back to a scalar sparse solver if the
block elimination ever proves unstable.
"""

import numpy as np
import scipy.linalg as sla
from threadpoolctl import threadpool_limits


def nested_dissection_order(mesh) -> np.ndarray:
    """Element ordering by recursive coordinate bisection with separators last."""
    centroids = mesh.nodes[mesh.tris].mean(axis=1)
    neighbors = [[] for _ in range(mesh.n_tris)]
    for e in range(mesh.n_edges):
        t0, t1 = mesh.edge_tris[e]
        if t1 >= 0:
            neighbors[t0].append(int(t1))
            neighbors[t1].append(int(t0))

    order: list = []

    def rec(idx: np.ndarray):
        if idx.size <= 8:
            order.extend(int(t) for t in idx)
            return
        c = centroids[idx]
        spread = c.max(axis=0) - c.min(axis=0)
        axis = int(np.argmax(spread))
        med = np.median(c[:, axis])
        in_b = c[:, axis] >= med
        if in_b.all() or (~in_b).all():
            order.extend(int(t) for t in idx)
            return
        b_set = set(idx[in_b].tolist())
        a_idx = idx[~in_b]
        sep_mask = np.array(
            [any(nb in b_set for nb in neighbors[t]) for t in a_idx]
        )
        interior_a = a_idx[~sep_mask]
        rec(interior_a)
        rec(idx[in_b])
        order.extend(int(t) for t in a_idx[sep_mask])

    rec(np.arange(mesh.n_tris))
    return np.array(order, dtype=int)


class BlockLU:
    """Right-looking block elimination of {(i, j): dense block} matrices."""

    def __init__(self, blocks: dict, sizes: np.ndarray, order: np.ndarray):
        with threadpool_limits(limits=1):
            self._factor(blocks, sizes, order)

    def _factor(self, blocks: dict, sizes: np.ndarray, order: np.ndarray):
        n = len(sizes)
        self.order = order
        pos = np.empty(n, dtype=int)
        pos[order] = np.arange(n)
        self.sizes = sizes[order]
        # permuted block matrix
        mat = {}
        for (i, j), b in blocks.items():
            mat[(int(pos[i]), int(pos[j]))] = b.copy()
        col = [[] for _ in range(n)]  # structural rows per column, i > k
        row = [[] for _ in range(n)]
        self.pivots = []
        self.W = []  # per k: list of (i, A_ik Akk^{-1})
        self.U = []  # per k: list of (j, pivot row block)
        for (i, j) in mat:
            if i > j:
                col[j].append(i)
            elif j > i:
                row[i].append(j)
        for k in range(n):
            piv = sla.lu_factor(mat.pop((k, k)), check_finite=False)
            self.pivots.append(piv)
            rows_k = sorted(set(col[k]))
            cols_k = sorted(set(row[k]))
            Wk = []
            Uk = []
            for j in cols_k:
                Uk.append((j, mat[(k, j)]))
            for i in rows_k:
                Aik = mat.pop((i, k))
                Wik = np.ascontiguousarray(
                    sla.lu_solve(piv, Aik.T, trans=1, check_finite=False).T
                )
                Wk.append((i, Wik))
                for j, Akj in Uk:
                    key = (i, j)
                    upd = Wik @ Akj
                    cur = mat.get(key)
                    if cur is None:
                        mat[key] = -upd
                        if i > j:
                            col[j].append(i)
                        elif j > i:
                            row[i].append(j)
                    else:
                        cur -= upd
            for j, Akj in Uk:
                del mat[(k, j)]
            self.W.append(Wk)
            self.U.append(Uk)
        starts = np.concatenate([[0], np.cumsum(self.sizes)])
        self.starts = starts

    def solve(self, rhs_blocks: list) -> list:
        """rhs_blocks indexed by ORIGINAL element id; returns the same layout."""
        with threadpool_limits(limits=1):
            return self._solve(rhs_blocks)

    def _solve(self, rhs_blocks: list) -> list:
        n = len(self.sizes)
        y = [rhs_blocks[self.order[k]].copy() for k in range(n)]
        for k in range(n):
            yk = y[k]
            for i, Wik in self.W[k]:
                y[i] -= Wik @ yk
        x = [None] * n
        for k in range(n - 1, -1, -1):
            acc = y[k]
            for j, Akj in self.U[k]:
                acc = acc - Akj @ x[j]
            x[k] = sla.lu_solve(self.pivots[k], acc, check_finite=False)
        out = [None] * n
        for k in range(n):
            out[self.order[k]] = x[k]
        return out
