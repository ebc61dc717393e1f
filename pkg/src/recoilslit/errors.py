"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class FitError(RuntimeError):
    """A fit could not produce a valid result."""


class FitInvalidError(FitError):
    """The fitted parameters fall outside the model's physical domain."""


class ConvergenceError(FitError):
    """The optimiser failed to converge.

    ``diagnostics`` carries whatever the optimiser reported.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
