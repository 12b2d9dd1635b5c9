"""Exception hierarchy shared by the simulator, the circuit language and the CLI."""

from __future__ import annotations


class HardyweaveError(Exception):
    """Base class for every error raised by this package.

    ``stage`` is filled in by the pipeline runner with the name of the stage
    that failed, so callers can report where a run stopped.
    """

    stage: str | None = None


# --- state algebra -----------------------------------------------------------


class DuplicateMode(HardyweaveError, ValueError):
    pass


class ModeCollision(HardyweaveError, ValueError):
    pass


class UnregisteredMode(HardyweaveError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


class CutoffExceeded(HardyweaveError, ValueError):
    pass


class ZeroNorm(HardyweaveError, ValueError):
    pass


class UnsupportedParam(HardyweaveError, ValueError):
    pass


# --- physics gates -----------------------------------------------------------


class PhysicsGateError(HardyweaveError):
    """A run was rejected on physical grounds rather than because of bad input."""


class EmptySelection(PhysicsGateError):
    pass


class CancellationFailed(PhysicsGateError):
    """The |u_S u_I> amplitude survived post-selection.

    ``residual`` is that amplitude divided by the norm of the remaining terms.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class FactorizationError(PhysicsGateError):
    pass


class UnnormalizedInput(HardyweaveError, ValueError):
    pass


class ConfigError(HardyweaveError, ValueError):
    pass


# --- circuit language --------------------------------------------------------


class ParseError(HardyweaveError):
    """Syntax or validation error in a ``.circ`` source, located by ``span``."""

    def __init__(self, message: str, span=None):
        super().__init__(message)
        self.message = message
        self.span = span

    def __str__(self) -> str:
        if self.span is None:
            return self.message
        return f"{self.span.line}:{self.span.column}: {self.message}"


class UnknownKeyword(ParseError):
    pass


class UndeclaredMode(ParseError):
    pass


class ArityMismatch(ParseError):
    pass


class DuplicateProducer(ParseError):
    pass


class BadNumberLiteral(ParseError):
    pass


class DuplicateDeclaration(ParseError):
    pass


class MissingParam(ParseError):
    pass


class OutOfOrder(ParseError):
    """A mode is produced after some element already consumed it."""
