"""Exception hierarchy shared by every module."""


class BosonSimError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(BosonSimError, ValueError):
    """An argument is outside its documented domain."""


class ValidationError(InvalidArgumentError):
    """An object failed a structural check (unitarity, configuration totals, schema)."""


class SizeLimitError(BosonSimError):
    """The requested computation exceeds an exponential-cost cap."""


class BudgetOverflowError(BosonSimError, OverflowError):
    """A sample budget cannot be represented (the bound underflowed)."""


class DegenerateDistributionError(BosonSimError):
    """A (truncated) distribution has no positive mass to sample from."""
