"""Exception hierarchy for bihamlab."""


class BihamError(Exception):
    """Base class for all errors raised by bihamlab."""


class DimensionMismatch(BihamError, ValueError):
    pass


class NotHermitian(BihamError, ValueError):
    pass


class RegularityViolation(BihamError, ValueError):
    """A diagonal point is not in the open alcove (some gap below ``min_gap``)."""


class NonzeroDiagonal(BihamError, ValueError):
    pass


class SingularValueCollision(BihamError):
    pass


class NotInvertible(BihamError):
    pass


class CrossCheckFailure(BihamError):
    pass


class RegularityLost(BihamError):
    """Raised by the integrator when a trajectory approaches the alcove wall."""

    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(message or f"trajectory left the regular domain at t={t!r}")


class ConfigError(BihamError, ValueError):
    pass
