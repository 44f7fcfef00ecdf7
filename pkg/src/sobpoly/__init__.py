"""Sobolev bi-orthogonal polynomial sequences from measure-matrix bilinear
forms, with the full deformation calculus: additive and coherent-pair
perturbations, discrete masses, integration-by-parts equivalence moves,
Christoffel/Geronimus/linear-spectral transforms, differential-operator
deformations, and Toda-type time flows.  Every closed formula is
cross-checked against an independent re-factorization oracle.
"""

from .core import (
    CAUCHY,
    CD,
    MIXED1,
    MIXED2,
    Factorization,
    MeasureMatrix,
    SBPS,
    SobolevSystem,
    assemble_moment_matrix,
    bilinear,
    factorize,
    kernel,
    kernel_derivatives,
    sbps,
    second_kind,
)
from .equivalence import (
    ANTIDERIVATIVE_SPREAD,
    SHIFT_LEFT_COLUMN,
    SHIFT_UP_ROW,
    DiagonalReduction,
    ElementaryMove,
    apply_move,
    build_operator_F,
    reduce_to_diagonal,
    tilde_omega_check,
)
from .errors import (
    CoherenceViolation,
    DomainError,
    GermSingular,
    NonPolynomialFactor,
    NotClassical,
    NotClosedUnderMove,
    NotCoprime,
    NotFactorizable,
    NotInvertible,
    ParameterOutOfRange,
    SeriesDivergence,
    SingularBlock,
    SobPolyError,
    SpecFileError,
    TildeOmegaViolation,
    TruncationInsufficient,
)
from .linalg import (
    BandProfile,
    Matrix,
    derivation_matrix,
    schur_complement,
    shift_matrix,
    x_operator,
)
from .measures import (
    Measure,
    PearsonFamily,
    hermite,
    jacobi,
    laguerre,
    pearson_step_operator,
    phi_polynomial,
    raw_moments,
    shifted_family_measure,
    standard_moment_matrix,
    uniform,
)
from .opdeform import (
    DiffOperator,
    generalized_diagonal,
    invertible_lower_link,
    operator_matrices,
    opdo_measure_matrix,
)
from .perturb import (
    AdditiveData,
    CoherencePair,
    DiscreteSpec,
    additive_perturb,
    block_coherent_sbps,
    classical_pair,
    coherent_pair_sbps,
    discrete_sobolev,
    w_recurrence,
)
from .poly import Polynomial
from .precision import get_precision, precision, set_precision, tolerance
from .toda import (
    TimePoint,
    TodaState,
    deformed_moment_matrix,
    evolve,
    lax_residual,
    zakharov_shabat_residual,
)
from .transforms import (
    GermSet,
    GeronimusSpec,
    TransformResult,
    christoffel,
    christoffel_kernel_link,
    geronimus,
    germ_vector,
    quasi_recurrence,
    spectral,
)

__version__ = "0.1.0"
