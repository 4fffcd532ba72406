"""Exception types shared across the package.

Exit-code mapping used by the CLI: ConfigError and DataError are usage
problems (exit 2); everything else raised by the library is a runtime
failure (exit 1).
"""

from __future__ import annotations


class BayeslinkError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(BayeslinkError):
    """A configuration value is missing, malformed, or out of range."""

    exit_code = 2


class DataError(BayeslinkError):
    """An input record file is malformed or inconsistent with the field spec."""

    exit_code = 2

    def __init__(self, message: str, *, file: str | None = None, record: object = None):
        parts = []
        if file is not None:
            parts.append(f"file {file!r}")
        if record is not None:
            parts.append(f"record {record!r}")
        if parts:
            message = f"{message} ({', '.join(parts)})"
        super().__init__(message)
        self.file = file
        self.record = record


class InvariantViolation(BayeslinkError):
    """An internal state invariant was broken (one-to-one matching, counts)."""


class DegeneratePosteriorError(BayeslinkError):
    """A regression arm cannot be sampled from its current conditioning set.

    Carries which arm failed ("match" or "nonmatch") and the number of
    pairs that arm was conditioned on.
    """

    def __init__(self, arm: str, n: int, reason: str = "undersized conditioning set"):
        super().__init__(f"{arm} regression arm: {reason} (n={n})")
        self.arm = arm
        self.n = n
