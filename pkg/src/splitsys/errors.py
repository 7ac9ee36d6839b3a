"""Exception types raised by splitsys."""


class SplitsysError(Exception):
    pass


class ConfigurationError(SplitsysError, ValueError):
    """Invalid parameters or an instance that violates a checkable assumption."""


class DomainError(SplitsysError, ValueError):
    """An oracle was called at a point outside the operator's domain."""


class LinesearchFailure(SplitsysError, RuntimeError):
    def __init__(self, message, component=None, iteration=None):
        super().__init__(message)
        self.component = component
        self.iteration = iteration


class InvariantViolation(SplitsysError, AssertionError):
    """A run-time check of a convergence guarantee failed (verify mode)."""


class OracleFailure(SplitsysError, RuntimeError):
    pass
