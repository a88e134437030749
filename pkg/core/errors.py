"""
Exception hierarchy.

- InputError: malformed files, rows, config values (CLI exit code 1)
- ModelError: model document / model structure problems (also an input error)
- NumericalError: singular or ill-conditioned solves (CLI exit code 2)
"""


class H2LCAError(Exception):
    """Base class for every error raised by the engine."""


class InputError(H2LCAError, ValueError):
    """Bad input data or configuration."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelError(InputError):
    """Structural problem in a system model."""


class ModelSyntaxError(ModelError):
    """Model document could not be parsed."""

    def __init__(self, message: str, line: int, column: int = 1):
        self.column = column
        super().__init__(f"{message} (column {column})", line=line)


class PartitionError(ModelError):
    """Incidence matrix cannot be split into a square A and B."""


class NumericalError(H2LCAError, ArithmeticError):
    """Linear solve failed or numerical preconditions were violated."""
