"""Upwind finite-difference solver for time-dependent radiative transport
on rectangles and boxes, with velocity-style direction grids, a-priori
stability checking, and fixed-point iteration to stationary solutions."""

from .errors import ConfigError, NumericsError, StabilityError
from .phasespace import (Field, Grid2D, Grid3D, InflowSet, Medium,
                         build_grid2d, build_grid3d, build_medium,
                         classify_inflow, make_norm_mask, outflow_padded,
                         sup_norm)
from .phasefunc import (ConditionResult, PhaseFunction,
                        check_theta_condition_analytic,
                        check_theta_condition_c2, hg2d, hg3d,
                        load_kernel_table, scattering_row_sum,
                        tabulated_kernel, uniform2d, uniform3d)
from .operators import (Workspace2D, apply_A, apply_B, apply_K, apply_Sigma,
                        build_workspace)
from .transient import (Problem2D, StabilityReport, TransientResult,
                        check_stability, integrated_intensity,
                        make_problem_2d, run_transient)
from .stationary import (SteadyResult, contraction_lambda, rho_bound,
                         solve_stationary, steady_residual)
from .scheme3d import (Problem3D, Workspace3D, build_workspace_3d,
                       check_stability_3d, integrated_intensity_3d,
                       make_problem_3d, scattering_matrix_3d,
                       spherical_row_sum)
from .verification import (ConvergenceStudy, ManufacturedSolution2D,
                           algebraic_decay_kernel, angular_study,
                           assemble_dense_system, dense_stationary_solve,
                           fit_order, periodic_trapezoid,
                           polynomial_bump_mms, separable_solution,
                           solution_error, spacetime_study,
                           trapezoid_error_bound)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "NumericsError", "StabilityError",
    "Field", "Grid2D", "Grid3D", "InflowSet", "Medium",
    "build_grid2d", "build_grid3d", "build_medium", "classify_inflow",
    "make_norm_mask", "outflow_padded", "sup_norm",
    "ConditionResult", "PhaseFunction", "check_theta_condition_analytic",
    "check_theta_condition_c2", "hg2d", "hg3d", "load_kernel_table",
    "scattering_row_sum", "tabulated_kernel", "uniform2d", "uniform3d",
    "Workspace2D", "apply_A", "apply_B", "apply_K", "apply_Sigma",
    "build_workspace",
    "Problem2D", "StabilityReport", "TransientResult", "check_stability",
    "integrated_intensity", "make_problem_2d", "run_transient",
    "SteadyResult", "contraction_lambda", "rho_bound", "solve_stationary",
    "steady_residual",
    "Problem3D", "Workspace3D", "build_workspace_3d", "check_stability_3d",
    "integrated_intensity_3d", "make_problem_3d", "scattering_matrix_3d",
    "spherical_row_sum",
    "ConvergenceStudy", "ManufacturedSolution2D", "algebraic_decay_kernel",
    "angular_study", "assemble_dense_system", "dense_stationary_solve",
    "fit_order", "periodic_trapezoid", "polynomial_bump_mms",
    "separable_solution", "solution_error", "spacetime_study",
    "trapezoid_error_bound",
    "__version__",
]
