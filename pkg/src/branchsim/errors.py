"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when model or experiment parameters violate an invariant.

    Collects one message per violated invariant so callers can report
    all problems at once instead of just the first.
    """

    def __init__(self, *messages):
        self.messages = [m for m in messages if m]
        super().__init__("; ".join(self.messages) if self.messages else "invalid configuration")


class DiagnosticError(RuntimeError):
    """Raised when a runtime diagnostic fails (e.g. degenerate importance weights)."""
