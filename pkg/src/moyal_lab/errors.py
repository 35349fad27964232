"""Exception hierarchy shared across the package."""


class MoyalLabError(Exception):
    """Base class for all package errors."""


class InvalidFieldError(MoyalLabError, ValueError):
    """A grid field (or a sampled function) contains non-finite values."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class IncompatibleGridsError(MoyalLabError, ValueError):
    pass


class NormalizationError(MoyalLabError, ValueError):
    def __init__(self, message, measured):
        super().__init__(message)
        self.measured = measured


class StarProductAccuracyError(MoyalLabError, ArithmeticError):
    """A variance came out negative beyond tolerance."""


class DomainError(MoyalLabError, ValueError):
    """A parameter lies outside its admissible domain (e.g. gamma <= 0)."""


class CaseConstraintError(MoyalLabError, ValueError):
    """Parameters do not satisfy the constraints of a closed-form case."""


class UnsupportedRegimeError(MoyalLabError, ValueError):
    pass


class FlowSingularityError(MoyalLabError, ArithmeticError):
    def __init__(self, message, nearest):
        super().__init__(message)
        self.nearest = nearest


class OutsideValidityError(MoyalLabError, ArithmeticError):
    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class FormulaConsistencyError(MoyalLabError, ArithmeticError):
    pass


class StepSizeError(MoyalLabError, ValueError):
    def __init__(self, message, limit):
        super().__init__(message)
        self.limit = limit


class DomainTooSmallError(MoyalLabError, RuntimeError):
    def __init__(self, message, boundary_mass):
        super().__init__(message)
        self.boundary_mass = boundary_mass


class QuadratureDivergenceError(MoyalLabError, ArithmeticError):
    def __init__(self, message, low, high):
        super().__init__(message)
        self.low = low
        self.high = high


class ConfigError(MoyalLabError, ValueError):
    def __init__(self, message, lineno=None):
        super().__init__(message if lineno is None else f"line {lineno}: {message}")
        self.lineno = lineno
