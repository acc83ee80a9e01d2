"""MPRK22(alpha) schemes for positive, conservative production-destruction systems."""

from .core import (MPRKParams, Regime, StepWorkspace, Trajectory, assemble_patankar_matrix,
                   gamma, integrate, mprk22_step, sigma_weights)
from .errors import (AssemblyError, DomainError, MPRKError, SingularMatrixError, StepError,
                     ValidationError)
from .linalg import solve_dense, solve_mmatrix
from .pds import (GeneralPDS, LinearPDS, TwoSpeciesSystem, linear_as_general,
                  load_rate_matrix, steady_state_two_species, validate_linear)
from .stability import (classify, dg_analytic_2x2, dg_implicit, fd_jacobian,
                        psi_phi_jacobians, r_limit_negative_alpha, stability_function, z_star)

__version__ = "0.1.0"

__all__ = [
    "AssemblyError", "DomainError", "GeneralPDS", "LinearPDS", "MPRKError", "MPRKParams",
    "Regime", "SingularMatrixError", "StepError", "StepWorkspace", "Trajectory",
    "TwoSpeciesSystem", "ValidationError", "assemble_patankar_matrix", "classify",
    "dg_analytic_2x2", "dg_implicit", "fd_jacobian", "gamma", "integrate",
    "linear_as_general", "load_rate_matrix", "mprk22_step", "psi_phi_jacobians",
    "r_limit_negative_alpha", "sigma_weights", "solve_dense", "solve_mmatrix",
    "stability_function", "steady_state_two_species", "validate_linear", "z_star",
]
