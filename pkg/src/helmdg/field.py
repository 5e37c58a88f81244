"""Broken polynomial fields over a mesh with per-element degrees."""

from dataclasses import dataclass

import numpy as np

from .basis import scalar_basis
from .mesh import Mesh


@dataclass
class DGField:
    mesh: Mesh
    degrees: np.ndarray  # (M,) int
    coeffs: np.ndarray  # complex, concatenated per-element modal blocks
    offsets: np.ndarray  # (M+1,)

    @classmethod
    def zeros(cls, mesh: Mesh, degrees) -> "DGField":
        degrees = np.asarray(degrees, dtype=int)
        if degrees.shape != (mesh.n_tris,):
            raise ValueError("one degree per triangle required")
        if np.any(degrees < 1):
            raise ValueError("DG degrees must be >= 1")
        sizes = (degrees + 1) * (degrees + 2) // 2
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        return cls(mesh, degrees, np.zeros(offsets[-1], dtype=complex), offsets)

    @property
    def n_dof(self) -> int:
        return int(self.offsets[-1])

    def block(self, t: int) -> np.ndarray:
        return self.coeffs[self.offsets[t] : self.offsets[t + 1]]

    def eval(self, t: int, ref_pts: np.ndarray) -> np.ndarray:
        V = scalar_basis(int(self.degrees[t])).eval(ref_pts)
        return V @ self.block(t)

    def eval_grad(self, t: int, ref_pts: np.ndarray) -> np.ndarray:
        """Physical gradient at reference points; (n, 2) complex."""
        _, G = scalar_basis(int(self.degrees[t])).eval_with_grad(ref_pts)
        ref_grad = np.einsum("nmc,m->nc", G, self.block(t))
        return ref_grad @ self.mesh.Binv[t]  # (B^-T grad)^T = grad^T B^-1

    def eval_q(self, t: int, order: int) -> np.ndarray:
        """Values at the cached volume-rule points of the given order."""
        from .tables import vol_tab

        V, _ = vol_tab(int(self.degrees[t]), order)
        return V @ self.block(t)

    def eval_grad_q(self, t: int, order: int) -> np.ndarray:
        from .tables import vol_grad_flat

        Gf = vol_grad_flat(int(self.degrees[t]), order)
        ref = (self.block(t) @ Gf).reshape(-1, 2)
        return ref @ self.mesh.Binv[t]

    def interpolate(self, func) -> "DGField":
        """L2-project a callable of physical coordinates element by element."""
        from .quadrature import triangle_rule

        out = DGField.zeros(self.mesh, self.degrees)
        for t in range(self.mesh.n_tris):
            p = int(self.degrees[t])
            rule = triangle_rule(2 * p + 12)
            V = scalar_basis(p).eval(rule.points)
            vals = func(self.mesh.map_to_physical(t, rule.points))
            out.block(t)[:] = (rule.weights * vals) @ V
        return out


def total_dof(degrees) -> int:
    degrees = np.asarray(degrees)
    return int(np.sum((degrees + 1) * (degrees + 2) // 2))


def interpolate(mesh: Mesh, degrees, func) -> DGField:
    return DGField.zeros(mesh, degrees).interpolate(func)
