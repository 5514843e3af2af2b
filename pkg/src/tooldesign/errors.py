"""Exception types shared across the package."""


class ToolDesignError(Exception):
    """Base class for all package errors."""


class DomainSolveFailed(ToolDesignError):
    """The curve domain for a fixed arc length could not be solved."""


class DegenerateGeometry(ToolDesignError):
    """A polyline collapses to fewer than two distinct points."""


class RolloutTooShort(ToolDesignError):
    """Fewer samples than needed for second differences."""


class GPSolveFailed(ToolDesignError):
    """Kernel matrix stayed singular after jitter escalation."""


class ConfigError(ToolDesignError):
    """Malformed or inconsistent run configuration."""
