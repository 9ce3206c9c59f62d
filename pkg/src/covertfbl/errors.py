"""Exception types raised across the package."""


class CovertError(Exception):
    """Base class for all package errors."""


class DomainError(CovertError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ParameterError(CovertError, ValueError):
    """A parameter combination is unusable (e.g. a shell too thin to sample)."""


class BudgetExhausted(ParameterError):
    """The truncation cost alone already exceeds the TVD budget."""

    def __init__(self, n, mu, delta, one_minus_delta):
        self.n = n
        self.mu = mu
        self.delta = delta
        self.one_minus_delta = one_minus_delta
        super().__init__(
            f"TVD budget exhausted by truncation: n={n}, mu={mu}, delta={delta} "
            f"(1 - Delta = {one_minus_delta:.6g} >= delta)"
        )


class ScaleError(ParameterError):
    """A desk-scale oracle was asked to run beyond its supported size."""


class SolverError(CovertError, ArithmeticError):
    """A root finder or bracket search failed to converge."""


class InsufficientTailSamples(CovertError, ArithmeticError):
    """Too few Monte Carlo samples fell in the acceptance region."""

    def __init__(self, found, required):
        self.found = found
        self.required = required
        super().__init__(
            f"only {found} samples above threshold (need {required}); increase count"
        )
