class ConfigError(ValueError):
    """Invalid scenario configuration or parameter value."""


class UnsupportedOperation(NotImplementedError):
    pass


class DimensionError(ValueError):
    pass


class InfeasibleQP(RuntimeError):
    """Hard constraint cannot be satisfied (no input authority and negative margin)."""

    def __init__(self, message: str, row: str | None = None, violation: float | None = None):
        super().__init__(message)
        self.row = row
        self.violation = violation


class DivergenceError(RuntimeError):
    """Closed-loop state or control became non-finite. Carries the partial record."""

    def __init__(self, message: str, record=None):
        super().__init__(message)
        self.record = record
