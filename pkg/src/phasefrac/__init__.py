"""Phase-field approximation of cohesive-brittle fracture energies.

Discretizes the regularized two-prefactor functional on structured grids,
minimizes it by alternating convex subproblem solves, and checks the
predicted limit objects: the constants a and b, the cohesive surface
density, the optimal transition profile, and an explicit recovery
construction for planar-jump templates.
"""

__version__ = "0.1.0"

from .density import BulkDensity, HookeTensor, surface_norm
from .energy import (EnergyBreakdown, EpsParams, PsiSpec, assemble_energy,
                     cell_strain, gradient_u, gradient_v, sublevel_diagnostics)
from .fields import PolyField
from .grid import Grid, GridField, read_snapshot, write_snapshot
from .limits import (JumpTemplate, LimitConstants, ProfileSolution,
                     build_recovery, h1, h2, h_scale, limit_constants,
                     limit_constants_quadrature, limit_energy, limsup_check,
                     optimal_profile, recommended_grid, rho_of_eps, sigma_jump)
from .operators import (EllipticityReport, FirstOrderOperator, KernelField,
                        classify_ellipticity, deviatoric, full_strain,
                        kappa_bounds, kernel_residual, operator_from_matrix,
                        operator_from_name, sym_outer, sym_to_vec, vec_to_sym)
from .solve import (NumericalAbort, SolveHistory, SolverConfig,
                    alternate_minimize, apply_notch, elastic_initializer,
                    minimize_u, minimize_v)

__all__ = [
    "__version__",
    "BulkDensity", "HookeTensor", "surface_norm",
    "EnergyBreakdown", "EpsParams", "PsiSpec", "assemble_energy",
    "cell_strain", "gradient_u", "gradient_v", "sublevel_diagnostics",
    "PolyField",
    "Grid", "GridField", "read_snapshot", "write_snapshot",
    "JumpTemplate", "LimitConstants", "ProfileSolution", "build_recovery",
    "h1", "h2", "h_scale", "limit_constants", "limit_constants_quadrature",
    "limit_energy", "limsup_check", "optimal_profile", "recommended_grid",
    "rho_of_eps", "sigma_jump",
    "EllipticityReport", "FirstOrderOperator", "KernelField",
    "classify_ellipticity", "deviatoric", "full_strain", "kappa_bounds",
    "kernel_residual", "operator_from_matrix", "operator_from_name",
    "sym_outer", "sym_to_vec", "vec_to_sym",
    "NumericalAbort", "SolveHistory", "SolverConfig", "alternate_minimize",
    "apply_notch", "elastic_initializer", "minimize_u", "minimize_v",
]
