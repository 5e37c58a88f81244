"""Equilibrated error estimator, residual estimator, and exact-error norms."""

from dataclasses import dataclass

import numpy as np

from .field import DGField
from .mesh import Mesh, edge_trace_values
from .quadrature import edge_rule, triangle_rule
from .reconstruction import BrokenFlux, Potential
from .solver import (
    DGGradient,
    DGParams,
    ProblemData,
    _edge_bump,
    edge_geometry,
    edge_order,
    element_eps,
    volume_order,
)
from .special import J1_FIRST_ROOT
from .tables import vol_tab, vol_tab_hess


def trace_constants(mesh: Mesh) -> np.ndarray:
    """Per-element trace constant: C_tr^2 = (1/j + 1/j^2) h_T^2 / |T|."""
    j = J1_FIRST_ROOT
    return np.sqrt((1.0 / j + 1.0 / j**2) * mesh.diam**2 / mesh.areas)


@dataclass
class EstimatorReport:
    eta_total: float
    eta_flux: float
    eta_vol: float
    eta_bnd: float
    eta_noncf: float
    element_eta: np.ndarray  # marking indicator per element
    flux_misfit: np.ndarray
    vol_residual: np.ndarray
    bnd_misfit: np.ndarray
    noncf: np.ndarray
    osc_f: float = 0.0
    osc_g: float = 0.0
    bnd_data_term: float = 0.0  # || gamma k (h/p)(g - du/dn + i k u) ||_{0,dOmega}

    def regrouped_total(self) -> float:
        """Recompute eta from the per-element breakdown (bookkeeping identity)."""
        first = self.flux_misfit + self.vol_residual + self.bnd_misfit
        return float(np.sqrt(np.sum(first**2) + np.sum(self.noncf**2)))


def estimate(
    solution: DGField,
    gradient: DGGradient,
    flux: BrokenFlux,
    potential: Potential,
    params: DGParams,
    data: ProblemData,
    osc=None,
) -> EstimatorReport:
    mesh = solution.mesh
    degrees = solution.degrees
    eps = element_eps(mesh, params)
    hE, pE = edge_trace_values(mesh, degrees)
    k = params.k
    ctr = trace_constants(mesh)
    M = mesh.n_tris

    flux_misfit = np.zeros(M)
    vol_residual = np.zeros(M)
    bnd_misfit = np.zeros(M)
    noncf = np.zeros(M)

    for t in range(M):
        p = int(degrees[t])
        order = max(
            volume_order(p, data),
            2 * (flux.max_degree(t) + 1),  # RT_p fields live in [P_{p+1}]^2
            2 * (int(potential.tri_q[t]) - 1),
        )
        rule = triangle_rule(order)
        w = mesh.detB[t] * rule.weights
        gvals = gradient.values_q(t, order)
        svals, sdiv = flux.values_div_q(t, order)
        flux_misfit[t] = np.sqrt(w @ np.sum(np.abs(gvals + svals) ** 2, axis=1))
        uvals = solution.eval_q(t, order)
        fv = (
            np.asarray(data.f(mesh.map_to_physical(t, rule.points)), dtype=complex)
            if data.f is not None
            else 0.0
        )
        resid = fv + k * k * eps[t] * uvals - sdiv
        vol_residual[t] = (mesh.diam[t] / J1_FIRST_ROOT) * np.sqrt(
            w @ np.abs(resid) ** 2
        )
        pvals = potential.gradients_q(t, order)
        noncf[t] = np.sqrt(w @ np.sum(np.abs(gvals - pvals) ** 2, axis=1))

    bnd_data_sq = 0.0
    for e in np.nonzero(mesh.edge_boundary)[0]:
        t = int(mesh.edge_tris[e, 0])
        order = edge_order(pE[e], _edge_bump(data, mesh, e))
        geo = edge_geometry(mesh, e, degrees, order)
        V, Dn = geo.tabs[0]
        coeff = solution.block(t)
        uvals = V @ coeff
        dnu = Dn @ coeff
        gv = (
            np.asarray(data.g(geo.points, geo.n_plus), dtype=complex)
            if data.g is not None
            else np.zeros(len(geo.weights), dtype=complex)
        )
        kt = k * np.sqrt(eps[t])
        hp = hE[e] / pE[e]
        common = gv - dnu + 1j * kt * uvals
        sn = flux.normal_trace(t, e, edge_rule(order).points)
        misfit = sn + gv + 1j * kt * uvals - params.gamma * kt * hp * common
        norm_e = np.sqrt(geo.weights @ np.abs(misfit) ** 2)
        bnd_misfit[t] += ctr[t] * np.sqrt(mesh.edge_len[e]) * norm_e
        bnd_data_sq += (params.gamma * kt * hp) ** 2 * (
            geo.weights @ np.abs(common) ** 2
        )

    first = flux_misfit + vol_residual + bnd_misfit
    element_eta = np.sqrt(first**2 + noncf**2)
    eta_total = float(np.sqrt(np.sum(first**2) + np.sum(noncf**2)))
    report = EstimatorReport(
        eta_total=eta_total,
        eta_flux=float(np.sqrt(np.sum(flux_misfit**2))),
        eta_vol=float(np.sqrt(np.sum(vol_residual**2))),
        eta_bnd=float(np.sqrt(np.sum(bnd_misfit**2))),
        eta_noncf=float(np.sqrt(np.sum(noncf**2))),
        element_eta=element_eta,
        flux_misfit=flux_misfit,
        vol_residual=vol_residual,
        bnd_misfit=bnd_misfit,
        noncf=noncf,
        bnd_data_term=float(np.sqrt(bnd_data_sq)),
    )
    if osc is not None:
        report.osc_f = osc.osc_f
        report.osc_g = osc.osc_g
    return report


def estimate_residual(
    solution: DGField,
    params: DGParams,
    data: ProblemData,
) -> np.ndarray:
    """Classical residual indicators; returns per-element squared values."""
    mesh = solution.mesh
    degrees = solution.degrees
    eps = element_eps(mesh, params)
    hE, pE = edge_trace_values(mesh, degrees)
    k = params.k
    eta_sq = np.zeros(mesh.n_tris)

    for t in range(mesh.n_tris):
        p = int(degrees[t])
        order = volume_order(p, data)
        rule = triangle_rule(order)
        H = vol_tab_hess(p, order)
        coeff = solution.block(t)
        uvals = solution.eval_q(t, order)
        Bi = mesh.Binv[t]
        C = Bi @ Bi.T
        hess_ref = np.einsum("nmh,m->nh", H, coeff)  # xx, xy, yy reference parts
        lap = (
            C[0, 0] * hess_ref[:, 0]
            + 2.0 * C[0, 1] * hess_ref[:, 1]
            + C[1, 1] * hess_ref[:, 2]
        )
        fv = (
            np.asarray(data.f(mesh.map_to_physical(t, rule.points)), dtype=complex)
            if data.f is not None
            else 0.0
        )
        resid = lap + k * k * eps[t] * uvals + fv
        w = mesh.detB[t] * rule.weights
        eta_sq[t] += (mesh.diam[t] ** 2 / p**2) * float(w @ np.abs(resid) ** 2)

    for e in range(mesh.n_edges):
        order = edge_order(pE[e], _edge_bump(data, mesh, e))
        geo = edge_geometry(mesh, e, degrees, order)
        if not mesh.edge_boundary[e]:
            (V0, D0), (V1, D1) = geo.tabs
            t0, t1 = geo.tris
            c0, c1 = solution.block(t0), solution.block(t1)
            jump_u = V0 @ c0 - V1 @ c1
            jump_g = D0 @ c0 - D1 @ c1
            su = params.alpha * (pE[e] ** 2 / hE[e]) * float(
                geo.weights @ np.abs(jump_u) ** 2
            )
            sg = params.beta * (hE[e] / pE[e]) * float(geo.weights @ np.abs(jump_g) ** 2)
            eta_sq[t0] += 0.5 * (su + sg)
            eta_sq[t1] += 0.5 * (su + sg)
        else:
            t = geo.tris[0]
            V, Dn = geo.tabs[0]
            coeff = solution.block(t)
            gv = (
                np.asarray(data.g(geo.points, geo.n_plus), dtype=complex)
                if data.g is not None
                else np.zeros(len(geo.weights), dtype=complex)
            )
            kt = k * np.sqrt(eps[t])
            bnd = gv - Dn @ coeff + 1j * kt * (V @ coeff)
            eta_sq[t] += hE[e] * float(geo.weights @ np.abs(bnd) ** 2)
    return eta_sq


@dataclass
class TrueError:
    err_grad: float  # || grad u - G(u_hp) ||
    err_broken: float  # || grad_h (u - u_hp) ||
    err_l2: float  # k^2 || u - u_hp ||
    err_bnd: float  # k || u - u_hp ||_{0, dOmega}


def true_error(
    solution: DGField,
    gradient: DGGradient,
    exact,
    params: DGParams,
    quad_boost: int = 0,
) -> TrueError:
    """Elevated-quadrature error norms against a known exact solution."""
    mesh = solution.mesh
    degrees = np.asarray(solution.degrees)
    k = params.k
    sq_grad = 0.0
    sq_broken = 0.0
    sq_l2 = 0.0
    for p in np.unique(degrees):
        els = np.nonzero(degrees == p)[0]
        order = 2 * int(p) + 12 + quad_boost
        rule = triangle_rule(order)
        nq = rule.n
        phys = mesh.nodes[mesh.tris[els, 0]][:, None, :] + np.einsum(
            "qj,eij->eqi", rule.points, mesh.B[els]
        )
        flat = phys.reshape(-1, 2)
        ue = np.asarray(exact.u(flat), dtype=complex).reshape(len(els), nq)
        ge = np.asarray(exact.grad(flat), dtype=complex).reshape(len(els), nq, 2)
        for i_e, t in enumerate(els):
            w = mesh.detB[t] * rule.weights
            uh = solution.eval_q(int(t), order)
            gh = solution.eval_grad_q(int(t), order)
            sq_broken += w @ np.sum(np.abs(ge[i_e] - gh) ** 2, axis=1)
            sq_grad += w @ np.sum(
                np.abs(ge[i_e] - (gh - gradient.corr[t])) ** 2, axis=1
            )
            sq_l2 += w @ np.abs(ue[i_e] - uh) ** 2
    sq_bnd = 0.0
    hE, pE = edge_trace_values(mesh, degrees)
    for e in np.nonzero(mesh.edge_boundary)[0]:
        t = int(mesh.edge_tris[e, 0])
        order = edge_order(pE[e]) + quad_boost
        geo = edge_geometry(mesh, e, degrees, order)
        V, _ = geo.tabs[0]
        uh = V @ solution.block(t)
        ue = np.asarray(exact.u(geo.points), dtype=complex)
        sq_bnd += geo.weights @ np.abs(ue - uh) ** 2
    return TrueError(
        err_grad=float(np.sqrt(sq_grad)),
        err_broken=float(np.sqrt(sq_broken)),
        err_l2=float(k * k * np.sqrt(sq_l2)),
        err_bnd=float(k * np.sqrt(sq_bnd)),
    )
