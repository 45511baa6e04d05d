"""Exception types shared across the lab."""


class DomainError(ValueError):
    """A point or region lies outside where an object is defined."""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite or ill-conditioned values."""


class ConstructionError(RuntimeError):
    """An iterative construction could not satisfy its constraints."""


class NotFoundError(KeyError):
    """Requested object id is absent from the output store."""
