"""Exception hierarchy.

Math failures are first-class outcomes (a singular minor means the
bi-orthogonal sequence does not exist), so they carry enough data to be
reported, not just printed.
"""


class SobPolyError(Exception):
    """Base class for all library errors."""


class ParameterOutOfRange(SobPolyError, ValueError):
    """A measure-family parameter violates its admissibility constraint."""


class NotClassical(SobPolyError, ValueError):
    """Pearson machinery requested for a non-classical family."""


class SingularBlock(SobPolyError):
    """Leading block in a Schur complement is numerically singular."""


class NotFactorizable(SobPolyError):
    """A leading principal minor of the moment matrix vanishes.

    ``minor`` is the 1-based size of the first failing minor.
    """

    def __init__(self, minor, message=None):
        self.minor = minor
        super().__init__(message or f"moment matrix has a vanishing leading minor of size {minor}")


class DomainError(SobPolyError, ValueError):
    """Evaluation point lies inside the support hull."""


class NotClosedUnderMove(SobPolyError):
    """A density's derivative/antiderivative leaves the representable class."""


class CoherenceViolation(SobPolyError):
    """Supplied coherence data contradicts the defining relation."""


class SeriesDivergence(SobPolyError):
    """(I + K Xi) is singular: the perturbed sequence does not exist."""


class TildeOmegaViolation(SobPolyError):
    """A density fails the boundary-vanishing order required of it."""


class GermSingular(SobPolyError):
    """A germ block matrix in a quasi-determinant formula is singular."""


class NotCoprime(SobPolyError, ValueError):
    """Numerator and denominator root sets of a spectral transform overlap."""


class NotInvertible(SobPolyError):
    """Operator matrix face is not invertible at the working truncation."""


class NonPolynomialFactor(SobPolyError):
    """Pointwise elimination produced a non-polynomial factor (reported)."""


class TruncationInsufficient(SobPolyError):
    """Requested truncation too small for the flow padding rule."""


class SpecFileError(SobPolyError, ValueError):
    """Structured-text problem description failed validation."""
