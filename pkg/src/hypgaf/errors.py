"""Semantic exceptions shared across the package."""


class HypgafError(Exception):
    """Base class for package errors."""


class DomainError(HypgafError, ValueError):
    """Input outside the mathematical domain (e.g. a point not in the open ball)."""


class ResourceCapError(HypgafError, RuntimeError):
    """A derived quantity (node count, truncation degree, enumeration size) exceeds its cap."""


class ConfigError(HypgafError, ValueError):
    """Experiment configuration fails schema validation."""


class NumericFailureError(HypgafError, RuntimeError):
    """Per-trial numeric failures exceeded the configured budget."""
