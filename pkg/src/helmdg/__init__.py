"""hp-adaptive DG solver for the Helmholtz impedance problem with an
equilibrated-flux a posteriori error estimator."""

__version__ = "0.1.0"

from .adaptivity import AdaptState, MarkingConfig, RunConfig, adapt_loop, hp_decide, mark
from .benchmarks import BENCHMARKS, BenchmarkCase, initial_discretization, make_benchmark
from .estimator import EstimatorReport, estimate, estimate_residual, true_error
from .field import DGField, interpolate, total_dof
from .mesh import Mesh, Patch, build_structured_mesh, refine, serialize_mesh
from .reconstruction import (
    BrokenFlux,
    Potential,
    assemble_global_flux,
    assemble_global_potential,
    build_patch_data,
    reconstruct,
    solve_patch_flux,
    solve_patch_potential,
)
from .solver import (
    DGGradient,
    DGParams,
    ProblemData,
    assemble,
    dg_gradient,
    hat_orthogonality_residual,
    hat_orthogonality_residuals,
    lift_l0,
    lift_l1,
    solve,
)
