"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: input-type errors exit with 2 and
:class:`NumericDegeneracyError` exits with 3.
"""


class FGPError(Exception):
    """Base class for all errors raised by fgplab."""


class DomainError(FGPError, ValueError):
    """A point lies outside the domain on which an operation is defined."""


class InvalidGeneratorError(FGPError, ValueError):
    """A generating function is not positive and concave (or produced negative weights)."""


class NumericDegeneracyError(FGPError, ArithmeticError):
    """A wealth multiplier or similar quantity became nonpositive."""


class NotAGradientError(FGPError, ValueError):
    """A weight-ratio field failed the sampled conservativeness check."""


class InfeasibleTransportError(FGPError, ValueError):
    """No coupling with finite cost exists."""


class DegenerateFitError(FGPError, ValueError):
    """The training sample does not determine a nondegenerate distribution."""


class PriceParseError(FGPError, ValueError):
    """A price file is malformed. ``row`` is the 1-based line number, if known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
