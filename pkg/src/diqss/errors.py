"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested quantity."""


class NoThresholdError(DomainError):
    """The rate function does not change sign on the searched bracket."""


class ContractViolation(RuntimeError):
    """An operation was applied to data it must never touch."""


class EstimatorError(DomainError):
    """Not enough samples to form an empirical estimate."""


class ValidationFailure(AssertionError):
    """Monte Carlo statistics disagree with the closed forms."""
