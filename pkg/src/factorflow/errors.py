"""Exception hierarchy.

Every error carries the CLI exit code of its family so the command line
front end can map failures without a lookup table.
"""


class FactorFlowError(Exception):
    exit_code = 1


class ShapeError(FactorFlowError, ValueError):
    """Operand extents are incompatible."""

    exit_code = 2


class FormatError(FactorFlowError):
    """A file could not be parsed."""

    exit_code = 3


class BadMagicError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class ExtentOverflowError(FormatError):
    pass


class TrailingDataError(FormatError):
    pass


class UnsupportedFormatError(FormatError):
    pass


class MissingInputError(FactorFlowError, FileNotFoundError):
    exit_code = 3


class VerificationError(FactorFlowError):
    exit_code = 4


class CapExceededError(FactorFlowError):
    """Request would exceed a hard size guard of a brute-force routine."""

    exit_code = 5


class EmptyValidSetError(FactorFlowError, ValueError):
    """No valid pixels to evaluate."""

    exit_code = 3
