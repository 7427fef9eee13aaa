"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A distribution or model parameter is outside its valid domain."""


class ConfigError(ValueError):
    """A run configuration is inconsistent or incomplete."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge; message carries diagnostics."""


class InvariantViolation(RuntimeError):
    """An internal sampler invariant was broken (indicates a bug upstream)."""
