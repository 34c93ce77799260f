"""Exception types raised across the package."""


class StableSupError(Exception):
    """Base class for all package errors."""


class OutOfRange(StableSupError, ValueError):
    pass


class DegenerateRho(StableSupError, ValueError):
    pass


class NonPositiveT(StableSupError, ValueError):
    pass


class DomainError(StableSupError, ValueError):
    pass


class CauchyMode(StableSupError, ValueError):
    """Raised when an alpha != 1 formula is asked for alpha == 1 parameters."""


class CauchyModeMismatch(StableSupError, ValueError):
    pass


class MomentDoesNotExist(StableSupError, ValueError):
    pass


class IndexOrder(StableSupError, ValueError):
    pass


class KappaTooSmall(StableSupError, ValueError):
    def __init__(self, kappa: float, minimal: float):
        super().__init__(
            f"kappa={kappa!r} violates kappa^alpha >= max(rho, 1-rho); "
            f"minimal admissible kappa is {minimal!r}"
        )
        self.kappa = kappa
        self.minimal = minimal


class CapacityExceeded(StableSupError, IndexError):
    pass


class LevelOrder(StableSupError, ValueError):
    pass


class MissingOrder(StableSupError, KeyError):
    pass


class OutsideSupport(StableSupError, ValueError):
    pass


class PreconditionViolated(StableSupError, ValueError):
    pass


class EmptyGrid(StableSupError, ValueError):
    pass


class DivergentIntegral(StableSupError, ValueError):
    pass


class QuadratureFailure(StableSupError, RuntimeError):
    pass
