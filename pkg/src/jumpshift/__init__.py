"""Jump-indexed diagonal perturbations of identity on a Gaussian
coordinate space: path sampling, Jacobian factorization, Monte Carlo and
quadrature verification of the associated change-of-variables, degree and
invertibility identities, and inversion of the map."""

from .config import ExperimentConfig, load_config, parse_config
from .errors import (
    CapacityError,
    ConfigurationError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    JumpshiftError,
    NonContractiveError,
    UnsupportedOperationError,
    UsageError,
)
from .evolution import (
    EvolutionTrace,
    ScaleComparison,
    closed_form_jump_factor,
    compare_evolutions,
    evolve_jacobian,
    sde_jump_factor,
)
from .inverse import (
    InverseResult,
    functional_sde_residual,
    geometric_rate,
    invert_exact,
    picard_inverse,
)
from .jumps import (
    JumpEvent,
    JumpPath,
    SizeDistribution,
    carleman_determinant,
    doleans_exponential,
    fixed_jumps,
    jumps_up_to,
    sample_compound_poisson,
)
from .montecarlo import (
    MCEstimate,
    SubstreamFactory,
    TestFunctionSpec,
    change_of_variables_residual,
    estimate_abs_jacobian,
    estimate_mean_jacobian,
    mc_mean,
    quadrature_oracle,
    sum_over_preimage_check,
    variance_guard_triggered,
)
from .runner import Report, emit, render, run
from .shift import (
    JacobianBreakdown,
    ShiftOperator,
    build_shift,
    hs_norm,
    jacobian,
    perturb,
    shift_vector,
    truncation_distance,
)
from .wiener import (
    BasisSpec,
    GaussianSample,
    StepBasisAssignment,
    basis_derivative_value,
    divergence_coord,
    dyadic_points,
    path_value,
    sample_gaussian,
)

__version__ = "0.1.0"
