"""Exception hierarchy.

Validation problems derive from ``ValueError`` so that callers catching the
builtin keep working.  Failures of a numerical guarantee (a bound that could
not be certified) derive from :class:`NumericalGuaranteeError`; the command
line maps the two families to different exit codes.
"""


class TrapwalkError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(TrapwalkError, ValueError):
    """An argument violates a documented precondition."""


class IndexOrder(ValidationError):
    """Crossing indexes are not strictly increasing."""


class PhiOutOfRange(ValidationError):
    """Laplace exponent outside the domain where the matrix is finite."""


class EmptyMeasure(ValidationError):
    """Infimum requested over a point measure with no points."""


class NumericalGuaranteeError(TrapwalkError):
    """A rigorous error bound exceeded the tolerance requested by the caller."""


class EnvironmentTooShort(NumericalGuaranteeError):
    """The dynamic programme needed trap positions beyond the sampled ones.

    Attributes
    ----------
    reach : int
        Right-most site the computation tried to touch.
    """

    def __init__(self, message, reach=-1):
        super().__init__(message)
        self.reach = int(reach)


class TruncationTooCoarse(NumericalGuaranteeError):
    """The left truncation of a two-sided environment left too much mass."""


class PositionOverflow(NumericalGuaranteeError):
    """A trap position would not fit in a signed 64-bit integer."""
