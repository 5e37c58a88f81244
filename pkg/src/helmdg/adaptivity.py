"""Marking, the hp-refinement decision, and the adaptive driver loop."""

import csv
import math
import os
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .benchmarks import BenchmarkCase, initial_discretization
from .estimator import estimate, estimate_residual, trace_constants, true_error
from .mesh import refine, serialize_mesh
from .reconstruction import oscillations, reconstruct
from .solver import assemble, dg_gradient, solve
from .special import J1_FIRST_ROOT


@dataclass
class MarkingConfig:
    strategy: str = "maximum"  # or "fixed_fraction"
    theta: float = 0.75

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError("marking parameter must lie in (0, 1]")
        if self.strategy not in ("maximum", "fixed_fraction"):
            raise ValueError("strategy must be 'maximum' or 'fixed_fraction'")


def mark(indicators: np.ndarray, config: MarkingConfig) -> np.ndarray:
    """Indices of the elements selected for refinement."""
    eta = np.asarray(indicators, dtype=float)
    if np.any(eta < 0):
        raise ValueError("indicators must be nonnegative")
    if eta.size == 0 or np.max(eta) == 0.0:
        return np.array([], dtype=int)
    if config.strategy == "maximum":
        return np.nonzero(eta >= config.theta * np.max(eta))[0]
    n = math.ceil(config.theta * eta.size)
    order = np.lexsort((np.arange(eta.size), -eta))
    return np.sort(order[:n])


@dataclass
class AdaptState:
    """Predicted indicators and constants of the hp-decision algorithm."""

    pred_sq: np.ndarray  # (eta^pred_T)^2, infinity on the initial mesh
    level: int = 0
    gamma_h: float = 4.0
    gamma_p: float = 0.4
    gamma_n: float = 1.0

    @classmethod
    def initial(cls, n_elements: int, **kwargs) -> "AdaptState":
        return cls(np.full(n_elements, np.inf), **kwargs)


@dataclass
class HpDecision:
    h_marked: np.ndarray  # bool per element: marked and predicted decay violated
    new_degrees: np.ndarray  # degrees after p-refinement of the rest of the marked set
    child_pred_sq: np.ndarray  # per-child predicted value for h-refined parents
    pred_sq: np.ndarray  # updated prediction for elements that stay


def hp_decide(marked: np.ndarray, indicators: np.ndarray, degrees: np.ndarray, state: AdaptState) -> HpDecision:
    """The marked-element branch: h-refine when the indicator exceeded its
    prediction, p-refine otherwise; unmarked elements decay by gamma_n."""
    eta_sq = np.asarray(indicators, dtype=float) ** 2
    n = eta_sq.size
    is_marked = np.zeros(n, dtype=bool)
    is_marked[np.asarray(marked, dtype=int)] = True
    h_marked = is_marked & (eta_sq > state.pred_sq)
    p_marked = is_marked & ~h_marked

    new_degrees = np.asarray(degrees, dtype=int).copy()
    new_degrees[p_marked] += 1

    pred_sq = state.gamma_n * state.pred_sq
    pred_sq[p_marked] = state.gamma_p * eta_sq[p_marked]
    child_pred_sq = np.zeros(n)
    ph = np.asarray(degrees, dtype=float)
    child_pred_sq[h_marked] = (
        0.5 * state.gamma_h * (0.5 ** ph[h_marked]) * eta_sq[h_marked]
    )
    return HpDecision(h_marked, new_degrees, child_pred_sq, pred_sq)


def apply_decision(decision: HpDecision, parent_map: dict, n_new: int, state: AdaptState) -> tuple:
    """Propagate degrees and predictions onto the refined mesh.

    h-refined parents hand each child the Algorithm-1 value; elements split
    only by conformity closure distribute their updated prediction equally;
    untouched elements keep theirs.
    """
    degrees = np.empty(n_new, dtype=int)
    pred = np.empty(n_new)
    for t_old, children in parent_map.items():
        degrees[children] = decision.new_degrees[t_old]
        if decision.h_marked[t_old]:
            pred[children] = decision.child_pred_sq[t_old]
        elif len(children) > 1:
            pred[children] = decision.pred_sq[t_old] / len(children)
        else:
            pred[children] = decision.pred_sq[t_old]
    return degrees, AdaptState(
        pred, state.level + 1, state.gamma_h, state.gamma_p, state.gamma_n
    )


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

CSV_COLUMNS = [
    "level",
    "n_elements",
    "n_dof",
    "eta_total",
    "eta_flux",
    "eta_vol",
    "eta_bnd",
    "eta_noncf",
    "osc_f",
    "osc_g",
    "err_grad",
    "err_l2",
    "err_bnd",
    "eff_index",
    "eta_residual",
    "wall_time_s",
]

MODES = ("uniform_h", "uniform_p", "adaptive_h", "adaptive_hp")


@dataclass
class RunConfig:
    benchmark: str = "square_hankel"
    k: float = 20.0
    mode: str = "adaptive_hp"
    alpha: float = 10.0
    beta: float = 1.0
    gamma: float = 0.25
    marking: MarkingConfig = dc_field(default_factory=MarkingConfig)
    refine_strategy: str = "nvb"
    c_res: float = None  # benchmark default when None
    initial_degree: int = None  # override for the p = ceil(ln k) rule
    under_resolved_start: bool = False
    budget_dof: int = 20000
    budget_levels: int = 40
    with_residual_estimator: bool = False
    with_true_error: bool = True
    csv_path: str = None
    mesh_path: str = None
    workers: int = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.budget_dof <= 0 or self.budget_levels < 0:
            raise ValueError("budgets must be positive (levels may be zero)")


@dataclass
class LevelRecord:
    level: int
    n_elements: int
    n_dof: int
    report: object
    error: object  # TrueError or None
    eta_residual: float
    wall_time: float

    def csv_row(self) -> dict:
        r = {
            "level": self.level,
            "n_elements": self.n_elements,
            "n_dof": self.n_dof,
            "eta_total": f"{self.report.eta_total:.10e}",
            "eta_flux": f"{self.report.eta_flux:.10e}",
            "eta_vol": f"{self.report.eta_vol:.10e}",
            "eta_bnd": f"{self.report.eta_bnd:.10e}",
            "eta_noncf": f"{self.report.eta_noncf:.10e}",
            "osc_f": f"{self.report.osc_f:.10e}",
            "osc_g": f"{self.report.osc_g:.10e}",
            "err_grad": "",
            "err_l2": "",
            "err_bnd": "",
            "eff_index": "",
            "eta_residual": "",
            "wall_time_s": f"{self.wall_time:.3f}",
        }
        if self.error is not None:
            r["err_grad"] = f"{self.error.err_grad:.10e}"
            r["err_l2"] = f"{self.error.err_l2:.10e}"
            r["err_bnd"] = f"{self.error.err_bnd:.10e}"
            if self.error.err_grad > 0:
                r["eff_index"] = f"{self.report.eta_total / self.error.err_grad:.6f}"
        if self.eta_residual is not None:
            r["eta_residual"] = f"{self.eta_residual:.10e}"
        return r


class RunRecord(list):
    """Per-level records of one adaptive run."""

    def column(self, name):
        return [getattr_or_row(rec, name) for rec in self]


def getattr_or_row(rec: LevelRecord, name: str):
    row = rec.csv_row()
    val = row[name]
    if name in ("level", "n_elements", "n_dof"):
        return int(val)
    return float(val) if val != "" else None


def adapt_loop(case: BenchmarkCase, config: RunConfig, level_hook=None) -> RunRecord:
    """solve -> reconstruct -> estimate -> record -> mark -> decide -> refine."""
    params = case.params(config.alpha, config.beta, config.gamma)
    mesh, degrees = initial_discretization(
        case,
        c_res=config.c_res,
        under_resolved=config.under_resolved_start,
        degree=config.initial_degree,
    )
    state = AdaptState.initial(mesh.n_tris)
    records = RunRecord()

    writer = None
    csv_file = None
    if config.csv_path:
        os.makedirs(os.path.dirname(os.path.abspath(config.csv_path)), exist_ok=True)
        csv_file = open(config.csv_path, "w", newline="")
        writer = csv.DictWriter(csv_file, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        csv_file.flush()

    boost = None
    try:
        for level in range(config.budget_levels + 1):
            t0 = time.perf_counter()
            system = assemble(mesh, degrees, params, case.data)
            solution = solve(system)
            gradient = dg_gradient(solution, params)
            if case.flux_degree_boost is not None:
                boost = lambda z: case.flux_degree_boost(mesh, z)
            rec = reconstruct(
                solution,
                gradient,
                params,
                case.data,
                flux_degree_boost=boost,
                workers=config.workers,
            )
            osc = oscillations(
                rec.problems, mesh, J1_FIRST_ROOT, trace_constants(mesh)
            )
            report = estimate(
                solution, gradient, rec.flux, rec.potential, params, case.data, osc
            )
            err = None
            if config.with_true_error and case.exact is not None:
                err = true_error(solution, gradient, case.exact, params)
            eta_res = None
            if config.with_residual_estimator:
                eta_res = float(np.sqrt(np.sum(estimate_residual(solution, params, case.data))))
            wall = time.perf_counter() - t0
            record = LevelRecord(
                level, mesh.n_tris, solution.n_dof, report, err, eta_res, wall
            )
            records.append(record)
            if writer is not None:
                writer.writerow(record.csv_row())
                csv_file.flush()
            if level_hook is not None:
                level_hook(
                    level=level,
                    mesh=mesh,
                    degrees=degrees,
                    solution=solution,
                    gradient=gradient,
                    reconstruction=rec,
                    report=report,
                    error=err,
                )

            if level >= config.budget_levels or solution.n_dof >= config.budget_dof:
                break

            if config.mode == "uniform_p":
                degrees = degrees + 1
                state = AdaptState(
                    state.gamma_n * state.pred_sq, state.level + 1,
                    state.gamma_h, state.gamma_p, state.gamma_n,
                )
            elif config.mode == "uniform_h":
                mesh, parent_map = refine(mesh, range(mesh.n_tris), config.refine_strategy)
                degrees, state = _propagate_uniform(degrees, state, parent_map, mesh.n_tris)
            else:
                marked = mark(report.element_eta, config.marking)
                if marked.size == 0:
                    break
                if config.mode == "adaptive_h":
                    mesh, parent_map = refine(mesh, marked, config.refine_strategy)
                    degrees, state = _propagate_uniform(
                        degrees, state, parent_map, mesh.n_tris
                    )
                else:
                    decision = hp_decide(marked, report.element_eta, degrees, state)
                    h_set = np.nonzero(decision.h_marked)[0]
                    mesh, parent_map = refine(mesh, h_set, config.refine_strategy)
                    degrees, state = apply_decision(
                        decision, parent_map, mesh.n_tris, state
                    )
    except Exception as exc:
        raise RuntimeError(
            f"adaptive run failed at level {len(records)}: {exc}"
        ) from exc
    finally:
        if csv_file is not None:
            csv_file.close()

    if config.mesh_path:
        with open(config.mesh_path, "w") as fh:
            fh.write(serialize_mesh(mesh, degrees))
    return records


def _propagate_uniform(degrees, state, parent_map, n_new):
    new_deg = np.empty(n_new, dtype=int)
    pred = np.empty(n_new)
    for t_old, children in parent_map.items():
        new_deg[children] = degrees[t_old]
        val = state.gamma_n * state.pred_sq[t_old]
        pred[children] = val / len(children) if len(children) > 1 else val
    return new_deg, AdaptState(
        pred, state.level + 1, state.gamma_h, state.gamma_p, state.gamma_n
    )
