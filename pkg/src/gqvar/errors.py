"""Exception types raised across the package."""


class GqvarError(Exception):
    """Base class for every error raised by gqvar."""


class InvalidModelError(GqvarError, ValueError):
    pass


class OutOfRangeError(GqvarError, ValueError):
    pass


class SizeLimitError(GqvarError, ValueError):
    pass


class InvalidCovarianceError(GqvarError, ValueError):
    pass


class NotPSDError(GqvarError, ValueError):
    pass


class DivergentSeriesError(GqvarError, ValueError):
    pass


class OrderingError(GqvarError, ValueError):
    pass


class InsufficientDataError(GqvarError, ValueError):
    pass


class DomainError(GqvarError, ValueError):
    pass


class UnsupportedFunctionError(GqvarError, TypeError):
    pass


class ComplexityError(GqvarError, ValueError):
    pass


class OutOfTheoremError(GqvarError, ValueError):
    pass
