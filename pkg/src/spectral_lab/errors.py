"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for errors raised by spectral_lab."""


class DimensionError(LabError, ValueError):
    pass


class InvalidSubdomainError(LabError, ValueError):
    pass


class InvalidHorizonError(LabError, ValueError):
    pass


class InsufficientCutoffError(LabError, ValueError):
    pass


class OrderError(LabError, ValueError):
    pass


class NotEllipticError(LabError, ValueError):
    pass


class UnsupportedOrderError(LabError, ValueError):
    pass


class SingularPowerError(LabError, ValueError):
    pass


class ContourCollisionError(LabError, ValueError):
    pass


class TruncationError(LabError, ValueError):
    pass


class SingularResolventError(LabError, ValueError):
    pass


class DivisionGuardError(LabError, ZeroDivisionError):
    pass


class IllConditionedSensorError(LabError, ArithmeticError):
    pass


class FitError(LabError, ValueError):
    pass


class RescalingError(LabError, OverflowError):
    pass


class DegenerateBumpError(LabError, ArithmeticError):
    pass


class DomainError(LabError, ValueError):
    pass


class GramianAssemblyError(LabError, ArithmeticError):
    pass


class UncontrollableTruncationError(LabError, ArithmeticError):
    pass


class InadmissibleExponentError(LabError, ValueError):
    pass


class ConfigError(LabError, ValueError):
    """Invalid experiment configuration; ``where`` names the offending field."""

    def __init__(self, msg, where=None):
        super().__init__(msg)
        self.where = where
