"""Fractional powers of sub-Laplacians by heat-semigroup subordination.

Builds discrete sub-Laplacians on the Heisenberg group and Euclidean tori,
diagonalizes them, runs the spectral functional calculus (fractional powers,
heat semigroup), solves the associated extension problem by subordination
quadrature, and verifies the boundary-limit identity
lim_{t->0+} t^{1-2s} d_t u = -C(s) J^s phi along with the supporting
kernel estimates.
"""

__version__ = "0.1.0"

from .errors import (
    AccuracyError,
    CapacityError,
    ConfigError,
    EvaluationError,
    GridMismatchError,
    SubfracError,
)
from .group import (
    GridFunction,
    GridSpec,
    dilate,
    gaussian_bump,
    group_convolve,
    group_distance,
    group_inverse,
    group_mul,
    homogeneous_norm,
    inner_product,
    integral,
    lp_norm,
    make_grid,
    random_bump,
    read_gf1,
    write_gf1,
)
from .stencils import (
    DiscreteOperator,
    VectorFieldMatrix,
    apply_multi_index,
    assemble_operator,
    build_vector_field,
    check_homogeneity,
    export_matrix_market,
    operator_apply,
)
from .spectral import (
    ScalarMultiplier,
    SpectralDecomposition,
    apply_multiplier,
    delta_function,
    export_spectrum_csv,
    fractional_power,
    heat_apply,
    heat_kernel_column,
    heat_time_derivative_check,
    spectral_decompose,
    spectral_pairing,
)
from .extension import (
    BoundaryLimitResult,
    ExtensionParams,
    ExtensionProfile,
    QuadratureSpec,
    boundary_limit,
    extension_constant,
    extension_constant_quadrature,
    extension_dt,
    extension_dtt,
    extension_multiplier_values,
    extension_solve,
    extension_solve_tau_grid,
    l2_wellposedness_check,
    path_agreement,
    pde_residual,
    scalar_extension_multiplier,
    scalar_ode_residual,
    subordination_integral,
)
from .fourier import FourierDiagonal, cross_validate, fourier_fractional
from .estimates import (
    DecayFit,
    GaussianBoundResult,
    fit_loglog,
    gaussian_bound_check,
    kernel_decay_target_slope,
    kernel_norm_decay,
    kernel_reconstruction_gap,
    measure_ball_volumes,
    volume_growth_fit,
    weighted_kernel_norm,
    weighted_norm_decay,
    weighted_norm_target_slope,
    write_fit_report,
)
