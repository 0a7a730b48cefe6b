"""
Error hierarchy shared by every layer of the toolkit.

Each error carries the component that raised it and belongs to one
exit-code class, which the command-line entry point turns into a process
exit status.
"""

from typing import Optional, Sequence


class CambError(Exception):
    """Base exception for all toolkit errors."""

    exit_class = "numerical"

    def __init__(self, message: str, component: str = "camb"):
        self.component = component
        self.detail = message
        super().__init__(f"[{component}] {message}")


class ShapeError(CambError):
    """Operand shapes do not satisfy an operation's contract."""


class DomainError(CambError):
    """An input value lies outside an operation's mathematical domain."""

    def __init__(
        self,
        message: str,
        component: str = "tensor",
        index: Optional[Sequence[int]] = None,
    ):
        self.index = tuple(int(i) for i in index) if index is not None else None
        if self.index is not None:
            message = f"{message} at index {self.index}"
        super().__init__(message, component)


class ParameterError(CambError):
    """A hyperparameter passed to an operation is out of range."""


class ContractError(CambError):
    """A caller broke an API precondition (non-scalar backward, missing gradient)."""


class EvaluationError(CambError):
    """Metrics cannot be computed (for example an empty validity mask)."""


class NumericalError(CambError):
    """A numerical verification failed or produced non-finite values."""


class ConfigError(CambError):
    """Invalid configuration, detected before any model is built."""

    exit_class = "config"


class FormatError(CambError):
    """Malformed or unsupported file content, located by byte offset."""

    exit_class = "io"

    def __init__(self, message: str, component: str = "io", offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message, component)


class CheckpointError(FormatError):
    """Checkpoint container is corrupt, truncated or of another version."""

    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message, "checkpoint", offset)
