from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from sandpile.state_solver import RunReport


class SandpileError(Exception):
    pass


class GridError(SandpileError):
    pass


class FieldFormatError(SandpileError):
    pass


class ConfigError(SandpileError):
    """Invalid run configuration, anchored to a line of the config file when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LinearSolveError(SandpileError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (relative residual {residual:.3e})")


class DenseSolveError(SandpileError):
    pass


class NewtonError(SandpileError):
    def __init__(self, message: str, report: RunReport):
        self.report = report
        super().__init__(message)


class PathFollowingError(SandpileError):
    def __init__(
        self, stage: int, gamma: float, mu: float | None, report: RunReport | None, cause: str
    ):
        self.stage = stage
        self.gamma = gamma
        self.mu = mu
        self.report = report
        super().__init__(
            f"path-following stage {stage} (gamma={gamma:g}, mu={mu}) failed: {cause}"
        )


class AdmmError(SandpileError):
    def __init__(self, message: str, history: list[dict[str, Any]]):
        self.history = history
        super().__init__(message)
