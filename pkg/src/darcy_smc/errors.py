"""Exception types shared across the package."""


class DomainError(ValueError):
    """A coordinate or argument lies outside its admissible domain."""


class InvalidFieldError(ValueError):
    """A grid field violates a requirement (e.g. nonpositive conductivity)."""


class DimensionError(ValueError):
    """Array shapes or grids do not match."""


class NumericalError(RuntimeError):
    """A numerical routine failed (solver non-convergence, factorization failure)."""


class ConfigError(ValueError):
    """A configuration value is missing, unknown, or out of range."""


class ContractViolation(ValueError):
    """A caller-supplied input violates a documented precondition."""


class DegenerateEnsembleError(ValueError):
    """An ensemble is too small for the requested statistic."""
