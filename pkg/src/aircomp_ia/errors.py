"""Exception hierarchy shared by every module of the package."""


class AircompIAError(Exception):
    """Base class for all errors raised by this package."""


class ConstraintViolation(AircompIAError, ValueError):
    """A topology violates the adjacent-sharing constraints."""


class DimensionError(AircompIAError, ValueError):
    """Vector or matrix sizes do not agree."""


class InvalidParams(AircompIAError, ValueError):
    """Distribution or simulation parameters are out of range."""


class UnsupportedMode(AircompIAError, ValueError):
    """The requested operation is not defined for the scalar mode."""


class SchemeError(AircompIAError, ValueError):
    """An operation was invoked for the wrong precoding scheme."""


class SingularChannel(AircompIAError, ArithmeticError):
    """A diagonal channel entry is zero, so the C-chain cannot be formed."""


class SizeOverflow(AircompIAError, MemoryError):
    """A construction would exceed the configured column/size cap."""


class ContainmentFailure(AircompIAError, AssertionError):
    """An interference term is not covered by the generator set."""


class NumericalFailure(AircompIAError, ArithmeticError):
    """A floating-point decomposition did not converge."""


class RankDeficient(AircompIAError, ArithmeticError):
    """A receiver matrix is not of full column rank."""


class ParseError(AircompIAError, ValueError):
    """Malformed configuration text."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(AircompIAError, ValueError):
    """A configuration value violates a documented constraint."""
