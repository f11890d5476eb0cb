# core/errors.py

from typing import Optional


class SeriesValidationError(ValueError):
    """Raised when a time series is malformed (non-finite values, bad length, shape mismatch)."""


class ScenarioValidationError(ValueError):
    """
    Raised while ingesting a scenario. Names the offending file and,
    where it applies, the 1-based line in that file.
    """

    def __init__(self, message: str, path: Optional[str] = None, row: Optional[int] = None):
        self.path = str(path) if path is not None else None
        self.row = row
        self.reason = message

        where = ""
        if self.path is not None:
            where = self.path
            if row is not None:
                where += f" (line {row})"
            where += ": "
        super().__init__(where + message)


class NettingInfeasibleError(RuntimeError):
    """The netting LP of one window could not be solved to optimality."""

    def __init__(self, message: str, window_index: int, constraint_class: str):
        self.window_index = window_index
        self.constraint_class = constraint_class
        super().__init__(f"window {window_index} [{constraint_class}]: {message}")


class NonConvergenceWarning(UserWarning):
    """TP energy correction stopped at max_iterations before reaching e_min."""
