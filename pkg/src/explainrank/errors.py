"""Shared exception hierarchy."""


class ExplainrankError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(ExplainrankError):
    """Bad configuration or command-line usage (CLI exit code 2)."""
