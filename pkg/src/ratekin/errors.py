class RatekinError(ValueError):
    """Base class for invalid inputs to ratekin routines."""


class DomainError(RatekinError):
    """An argument lies outside the admissible parameter domain."""


class DegenerateError(RatekinError):
    """A quantity needed for normalisation vanished (zero dispersion, 0/0)."""
