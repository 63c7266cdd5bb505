"""Exception types shared across the package."""

from __future__ import annotations

from typing import Any, Dict, Optional


class MedianBayesError(Exception):
    """Root of every error raised by medianbayes."""


class DomainError(MedianBayesError, ValueError):
    """Input outside the domain of an operation."""


class SingularMatrixError(DomainError):
    """Matrix is numerically singular (condition estimate above the limit)."""


class ConfigError(MedianBayesError, ValueError):
    """Invalid study configuration or command-line input."""


class DataFormatError(ConfigError):
    """Input dataset could not be parsed."""


class ConvergenceError(MedianBayesError, RuntimeError):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.diagnostics: Dict[str, Any] = dict(diagnostics or {})


__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DataFormatError",
    "DomainError",
    "MedianBayesError",
    "SingularMatrixError",
]
