"""Spectral-Galerkin toolkit for anisotropic Shubin operators in the Hermite basis."""

from .errors import (
    CapabilityError,
    DomainError,
    FitError,
    HermitianDefectError,
    InsufficientDataError,
    LevelSetError,
    NonConvergenceError,
    NotEllipticError,
    ParseError,
    ShubinError,
    TruncationError,
    ValidationError,
)
from .hermite import (
    BandedOperatorMatrix,
    BasisSpec,
    QuadratureRule,
    derivative_matrix,
    gauss_hermite_rule,
    gaussian_coefficients,
    hermite_eval,
    hermite_values,
    monomial_matrix,
    position_matrix,
)
from .operators import (
    EllipticityReport,
    ShubinOperator,
    Term,
    assemble,
    ellipticity_check,
    model_operator,
    parse_operator,
    principal_symbol,
    read_operator,
)
from .spectral import (
    ExpansionCoefficients,
    SpectralDecomposition,
    WeylFit,
    convergence_study,
    eigendecompose,
    schwartz_test,
    sobolev_norm,
    spectral_power,
    weyl_fit,
)
from .expansion import (
    ClassifyConfig,
    DecayFit,
    GSClassification,
    IterateSeries,
    SampledFunction,
    classify,
    coefficient_decay_fit,
    elliptic_estimate_check,
    expand,
    expand_hermite,
    gevrey_fit,
    iterate_norms,
    level_set,
    reconstruct,
    seminorm,
    seminorm_growth_fit,
)

__version__ = "0.1.0"
