"""Shared exception types."""


class ValidationError(ValueError):
    """Raised when inputs violate a documented contract (bad config, malformed
    records, mismatched arguments). Maps to exit code 1 in the CLI; plain
    OSError maps to exit code 2."""
