"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid sizes, shapes or configuration values."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NotApplicable(Exception):
    """A check was requested outside the hypotheses it is meant to test."""


class DiagnosticError(RuntimeError):
    """A numerical procedure failed; carries its best iterate for inspection."""

    def __init__(self, message, best=None, value=None):
        super().__init__(message)
        self.best = best
        self.value = value
