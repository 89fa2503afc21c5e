"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes, so raising the right class
matters more than the message text.
"""


class UsageError(ValueError):
    """Caller violated a documented precondition or passed malformed input."""


class IdentifiabilityError(RuntimeError):
    """The available intervention targets cannot identify the requested effect."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularFitError(RuntimeError):
    """Regression design matrix is rank deficient."""

    def __init__(self, message, features=()):
        super().__init__(message)
        self.features = tuple(features)


class NumericalError(RuntimeError):
    """A linear-algebra step failed beyond repairable tolerance."""
