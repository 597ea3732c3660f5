"""Exception types shared across the package."""


class RegretLabError(Exception):
    """Base class for all package errors."""


class ConfigError(RegretLabError):
    """Invalid configuration, shape mismatch, or malformed input."""


class NumericError(RegretLabError):
    """A computation produced a non-finite value."""


class ProtocolError(RegretLabError):
    """An operation was called outside its legal lifecycle (e.g. stepping

    a terminated episode or mixing training modes mid-run)."""


class DegenerateDirection(RegretLabError):
    """Skill and representation coincide; no direction can be formed."""


class SkipUpdate(RegretLabError):
    """The whole batch was dropped; the caller should skip this update."""


class EmptyBuffer(RegretLabError):
    """A buffer-dependent regularizer was requested with no buffer data."""
