"""Exception taxonomy shared by all dmfpf modules."""


class FpfError(Exception):
    """Base class for all dmfpf errors."""


class ConfigError(FpfError):
    """Invalid configuration (bad sizes, missing keys, infeasible thresholds)."""


class DomainError(FpfError):
    """Invalid numeric input: non-finite values, dimension mismatch, query
    outside the supported region."""


class IterationError(FpfError):
    """A fixed-point iteration failed to reach its tolerance.

    Carries the last residual so callers can distinguish slow mixing from
    outright divergence.
    """

    def __init__(self, message, last_residual=None, iterations=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.iterations = iterations


class SimulationError(FpfError):
    """A simulated state became non-finite; carries the offending step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ScopeError(FpfError):
    """An oracle was asked to handle a model outside its validity scope."""


class TailError(FpfError):
    """A transition-density denominator underflowed: the query point lies too
    far outside the support of the reference density."""


class SingularityError(FpfError):
    """Density below the positivity floor at a quadrature query point."""


class HypothesisViolationError(FpfError):
    """The hypothesis of an analytic bound does not hold for the supplied
    parameters, so the bound's formula is not valid."""


class SamplingError(FpfError):
    """Could not produce a sample satisfying the requested feasibility
    condition within the retry budget."""


class DegeneracyWarning(UserWarning):
    """Importance weights collapsed (tiny effective sample size); the run
    continues but the estimate is suspect."""
