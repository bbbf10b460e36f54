"""Error types shared across the toolkit.

Every raised error carries a stable ``code`` string so batch drivers and the
CLI can report machine-readable failures without parsing prose.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base error with a stable machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


class InputError(ToolkitError):
    """Raised for malformed caller-supplied data (CLI exit code 1)."""


class ConfigError(ToolkitError):
    """Raised for invalid configuration (CLI exit code 2)."""


class InvariantError(ToolkitError):
    """Raised when an internal invariant breaks (CLI exit code 3)."""
