"""Desk-scale laboratory for a convective nonlocal Cahn-Hilliard system.

The pieces compose in dependency order: fields and stencils, the
logarithmic potential, the sampled interaction kernel, projections onto
admissible velocities, the implicit state solver, its linearization and
exact-transpose adjoint, and a projected-gradient control loop.  The
command line (``python -m nlch`` or the ``nlch`` script) drives
reproducible runs from INI configs.
"""

from .config import DEFAULTS, ProblemConfig, load_config, parse_config
from .control import ControlField, inner_q, norm_q
from .errors import (CflError, ConfigError, FieldError, FieldIOError,
                     GridError, KernelError, NewtonError, NlchError,
                     ProjectionError, SingularPotentialError, SolverError,
                     StepError)
from .fields import (Grid, ScalarField, VectorField, divergence, gradient,
                     inner, inner_vector, inv_neumann_laplacian,
                     laplacian_neumann, make_grid, norm_l2, norm_l2_vector,
                     reduce)
from .kernels import (KernelSpec, KernelTable, build_kernel, convolve,
                      grad_convolve)
from .leray import (ControlBounds, box_violation, divergence_linf,
                    leray_project, project_control, project_to_admissible,
                    random_solenoidal)
from .optimizer import (ControlProblem, CostBreakdown, OptimizationResult,
                        OptimizerOptions, evaluate_cost,
                        fd_directional_derivative, projected_gradient_descent,
                        reduced_gradient, stationarity_residual)
from .potential import PotentialParams, clip_to_domain, potential_eval
from .sensitivity import (AdjointTrajectory, TargetData, adjoint_flow,
                          adjoint_solve, duality_residual, linearized_solve,
                          tracking_derivative)
from .state import (StateParams, StateTrajectory, cfl_number, energy,
                    energy_identity_residual, simulate, state_step)
from .synthetic import smooth_field, synthetic_control
from .verify import REGISTRY, CheckResult, run_verify

__version__ = "0.1.0"

__all__ = [
    "AdjointTrajectory", "CflError", "CheckResult", "ConfigError",
    "ControlBounds", "ControlField", "ControlProblem", "CostBreakdown",
    "DEFAULTS", "FieldError", "FieldIOError", "Grid", "GridError",
    "KernelError", "KernelSpec", "KernelTable", "NewtonError", "NlchError",
    "OptimizationResult", "OptimizerOptions", "PotentialParams",
    "ProblemConfig", "ProjectionError", "REGISTRY", "ScalarField",
    "SingularPotentialError", "SolverError", "StateParams", "StateTrajectory",
    "StepError", "TargetData", "VectorField", "adjoint_flow", "adjoint_solve",
    "box_violation", "build_kernel", "cfl_number", "clip_to_domain",
    "convolve", "divergence", "divergence_linf", "duality_residual", "energy",
    "energy_identity_residual", "evaluate_cost", "fd_directional_derivative",
    "grad_convolve", "gradient", "inner", "inner_q", "inner_vector",
    "inv_neumann_laplacian", "laplacian_neumann", "leray_project",
    "linearized_solve", "load_config", "make_grid", "norm_l2",
    "norm_l2_vector", "norm_q", "parse_config", "potential_eval",
    "project_control", "project_to_admissible", "projected_gradient_descent",
    "random_solenoidal", "reduce", "reduced_gradient", "run_verify",
    "simulate", "smooth_field", "state_step", "stationarity_residual",
    "synthetic_control", "tracking_derivative",
]
