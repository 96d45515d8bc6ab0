"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(ValueError):
    """An input violates a structural contract (shape, normalisation, support)."""


class NumericIntegrityError(ArithmeticError):
    """A computed value is non-finite or violates a hard numeric invariant."""
