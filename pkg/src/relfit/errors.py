"""Exception types."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-finite values, empty mass, no convergence)."""


class DegenerateStatisticError(NumericalError):
    """A test statistic has zero or non-finite estimated spread."""
