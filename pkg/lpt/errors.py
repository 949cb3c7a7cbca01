"""
Exception hierarchy shared by every module.
"""


class LPTError(Exception):
    """Base class for all errors raised by the package."""


class ConfigError(LPTError):
    """One or more configuration values are invalid."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ValidationError(LPTError, ValueError):
    """Inputs violate a dimension, mode or range contract."""


class DomainError(LPTError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


class NonFiniteError(LPTError, FloatingPointError):
    """A NaN or Inf appeared where the contract requires finite values."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class GradientError(LPTError):
    """The function handed to ``grad`` is not a differentiable scalar."""


class DatasetFormatError(LPTError, ValueError):
    """A dataset file is malformed; ``line_number`` is 1-based."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class CheckpointError(LPTError):
    """A checkpoint cannot be read or does not match the requested use."""


class EnvStepError(LPTError):
    """An environment was stepped in an invalid state."""
