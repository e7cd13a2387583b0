"""Exception types raised by the semlink library."""


class SemLinkError(Exception):
    """Base class for all semlink errors."""


class DimensionMismatch(SemLinkError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ShapeMismatch(DimensionMismatch):
    """A tensor does not have the shape an operation requires."""


class IllConditioned(SemLinkError, ArithmeticError):
    """A linear system is too close to singular to solve reliably.

    Raised by the Hermitian solver when the smallest/largest pivot ratio
    drops below 1e-12; propagated by zero-forcing detection, where it is
    reported upstream as a frame erasure.
    """


class OddLength(SemLinkError, ValueError):
    """A real vector with odd last dimension cannot be split into halves."""


class OddWidth(OddLength):
    """A layer feeding the complex mapping must have even output width."""


class NonPositivePower(SemLinkError, ValueError):
    """Signal power must be strictly positive."""


class ZeroFrame(SemLinkError, ValueError):
    """An all-zero frame cannot be power-normalized."""


class TooShort(SemLinkError, ValueError):
    """Pilot schedule is too short for the number of users."""


class ZeroPilotSymbol(SemLinkError, ValueError):
    """A pilot slot carries a (near-)zero symbol and cannot be inverted."""


class ZeroVector(SemLinkError, ValueError):
    """A zero-norm feature vector has no defined cosine similarity."""


class IoFailure(SemLinkError, OSError):
    """Reading or writing an artifact file failed."""


class ConfigError(SemLinkError, ValueError):
    """An experiment configuration value is missing or invalid."""
