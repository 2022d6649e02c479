"""Exception types shared across the package.

Every error carries a short ``code`` so the command line front end can
print a single machine-parsable line.
"""


class BiphotonError(Exception):
    code = "error"


class DomainError(BiphotonError, ValueError):
    code = "domain"


class NumericalError(BiphotonError, ArithmeticError):
    code = "numerical"


class GridMismatchError(BiphotonError, ValueError):
    """The grid does not overlap the emission, or two grids disagree."""

    code = "grid-mismatch"


class CoverageError(BiphotonError, ValueError):
    code = "coverage"


class OutOfRangeError(BiphotonError, ValueError):
    code = "out-of-range"


class ParseError(BiphotonError, ValueError):
    code = "parse"


class ValidationError(BiphotonError, ValueError):
    code = "validation"


class TransmittanceError(BiphotonError, ZeroDivisionError):
    code = "division"
