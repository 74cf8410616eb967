"""Pathwise mild solutions of rough semilinear evolution equations in a truncated
spectral basis: fractional calculus, path-area pairs, twisted areas and a Picard
fixed-point solver."""

__version__ = "0.1.0"

from .areas import (AreaOperator, GridArea, area_norm, area_u_omega, chen_residual, oS_kernel,
                    omega_S_apply, omega_S_omega_apply, omega_S_tensor_omega_apply, path_area,
                    S_omega_apply, w_apply, w_exact, zero_area)
from .fraccalc import (QuadratureSpec, byparts_residual, frac_deriv_left, frac_deriv_right,
                       iterated_tensor_deriv, rough_integral, tensor_deriv, young_integral)
from .nonlinearity import NonlinearityG, G_apply, G_bounds_check, make_example_G, zero_G
from .paths import GridPath, HolderParams, TimeGrid, generate_fbm, path_norm, refine_dyadic
from .solver import (SolutionPair, SolverConfig, apply_T, apply_T1, apply_T2,
                     reference_mild_smooth, solve_fixed_point)
from .spectral import SpectralOperator, laplacian_operator, make_spectral_operator

__all__ = [name for name in dir() if not name.startswith("_")]
