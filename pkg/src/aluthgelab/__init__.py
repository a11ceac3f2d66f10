"""Numerical laboratory for the Aluthge transform and its relatives.

The package turns a family of operator-theoretic statements into
executable, tested computations: the transform and its iteration,
explicit regularization and polynomial-surrogate error bounds,
permutation-weight operators with closed-form iterates and limits,
binomial-weighted mean ergodic averaging, spectral measures with the
normalized-trace determinant, and a deterministic batch experiment
runner.
"""

from .aluthge import (
    ApproximationFailure,
    IterationStep,
    IterationTrace,
    SurrogatePolynomials,
    aluthge,
    continuity_probe,
    iterate,
    kernel_regularizer_gap,
    matrix_chebval,
    polynomial_surrogate,
    regularizer,
    regularizer_bounds,
    surrogate_apply,
)
from .binomial import residue_weight_sums, uniform_residue_sums
from .brown import (
    SpectralMeasure,
    brown_measure,
    disk_mass,
    fk_determinant,
    measure_distance,
    measure_from_csv,
    measure_to_csv,
    rotate_measure,
)
from .config import KINDS, ConfigError, ExperimentConfig, parse_config, parse_config_text
from .crossed import (
    PermutationWeightOperator,
    PrecisionWarning,
    aluthge_limit,
    binomial_orbit_transform,
    closed_form_iterate,
    conditional_expectation,
    densify,
    limit_h,
    orbits,
    permutation_matrix,
    power_limit_step,
    trace_model_check,
    uniform_mu,
)
from .crossed import from_text as permutation_from_text
from .crossed import load as load_permutation_operator
from .crossed import save as save_permutation_operator
from .crossed import to_text as permutation_to_text
from .ensembles import (
    ginibre,
    haar_unitary,
    random_contraction,
    random_log_uniform_weights,
    random_normal_matrix,
)
from .ergodic import (
    AveragingReport,
    ContractionViolation,
    binomial_average,
    binomial_discrepancy,
    binomial_discrepancy_exact,
    binomial_weights,
    binomial_weights_exact,
    cesaro_average,
    fixed_space_projection,
    functional_binomial_average,
)
from .operators import (
    DimensionError,
    EigensolverError,
    InvalidOperatorError,
    PolarDecomposition,
    SpectralDomainError,
    as_operator,
    hermitian_function,
    normality_defect,
    op_norm,
    polar,
    spectral_radius,
    trace_norm2,
)

__version__ = "0.1.0"
