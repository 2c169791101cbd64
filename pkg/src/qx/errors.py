"""Exception hierarchy shared by every qx module."""

from __future__ import annotations


class QxError(Exception):
    """Base class for all qx errors."""


class ZeroFactor(QxError, ValueError):
    """A factor has (numerically) zero norm and cannot be canonicalized."""


class NotNormalized(QxError, ValueError):
    """A state vector that must be unit-norm is not."""


class DuplicateName(QxError, KeyError):
    """A named state is registered twice."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class DiagnosticError(QxError):
    """An input error tied to a source position (1-based line and column)."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        if self.col is None:
            return f"line {self.line}: {self.message}"
        return f"line {self.line}, col {self.col}: {self.message}"


class ParseError(DiagnosticError):
    """Syntax error in circuit DSL or ket-expression text."""


class ValidationError(DiagnosticError):
    """Well-formed input that violates a semantic rule (arity, range, ...)."""


class ControlEntangled(QxError):
    """A control wire lives inside a multi-wire block factor."""


class BranchBudgetExceeded(QxError):
    """The branch count would exceed the policy's ``max_branches``."""


class TooManyQubits(QxError):
    """The dense oracle refuses circuits above its memory guard."""


class DimensionMismatch(QxError, ValueError):
    """Two states over different wire counts were compared."""
