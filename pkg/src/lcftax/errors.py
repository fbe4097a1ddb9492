"""Exception types shared across the package."""


class DomainError(ValueError):
    """A level or time lies outside the domain where a function is defined."""


class AdmissibilityError(ValueError):
    """A rate carries no certificate that the rate ODE has a unique solution."""


class ConfigError(ValueError):
    """A run configuration failed validation."""
