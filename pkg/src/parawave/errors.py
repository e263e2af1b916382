"""Exception types shared by the numerical modules and the command-line runner."""
from __future__ import annotations


class ConvergenceError(RuntimeError):
    """An iterative or adaptive procedure failed to reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class ConfigError(ValueError):
    """A configuration value is missing or invalid; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
