"""Exception hierarchy shared by all modules.

The CLI maps the three families below onto exit codes, so every error raised
by the library derives from exactly one of them.
"""
from __future__ import annotations

__all__ = [
    "VessiotKitError",
    "InputError",
    "NumericError",
    "SingularityError",
    "ExprSyntaxError",
    "UndeclaredVariableError",
    "DomainError",
    "ParameterError",
    "RankIndeterminateError",
    "NoDirectionError",
    "IrregularSingularityError",
    "NoConvergenceError",
    "SingularJacobianError",
    "OrientationFlipError",
    "OrientationFlipWarning",
    "NotQuasilinearError",
    "NotDeterminedError",
    "IndeterminateError",
    "SelectorSplitsPairError",
    "NearDegenerateError",
    "SpectraOverlapError",
    "ResonanceError",
    "DefectiveEigenvalueWarning",
    "DivergenceWarning",
    "EmptyResultError",
]


class VessiotKitError(Exception):
    """Base class of all library errors."""


class InputError(VessiotKitError, ValueError):
    """Malformed input: syntax, configuration or parameter violations."""


class NumericError(VessiotKitError, ArithmeticError):
    """A numerical procedure failed or could not decide."""


class SingularityError(VessiotKitError):
    """A precondition about singular points was violated."""


class ExprSyntaxError(InputError):
    def __init__(self, message: str, text: str = "", position: int = -1):
        self.text = text
        self.position = position
        if position >= 0:
            pointer = f"\n  {text}\n  {' ' * position}^"
            message = f"{message} at position {position}{pointer}"
        super().__init__(message)


class UndeclaredVariableError(InputError):
    def __init__(self, token: str, position: int = -1):
        self.token = token
        self.position = position
        super().__init__(f"undeclared variable {token!r}" + (f" at position {position}" if position >= 0 else ""))


class DomainError(NumericError):
    """Evaluation left the real domain of an elementary function."""

    def __init__(self, message: str, subtree=None):
        self.subtree = subtree
        if subtree is not None:
            message = f"{message} in subexpression {subtree}"
        super().__init__(message)


class ParameterError(InputError):
    pass


class RankIndeterminateError(NumericError):
    """A singular value fell inside the indeterminate band around the threshold."""

    def __init__(self, message: str, singular_values=None, threshold: float | None = None):
        self.singular_values = singular_values
        self.threshold = threshold
        super().__init__(message)


class NoDirectionError(NumericError):
    pass


class IrregularSingularityError(SingularityError):
    def __init__(self, message: str, point=None, nullity: int | None = None):
        self.point = point
        self.nullity = nullity
        super().__init__(message)


class NoConvergenceError(NumericError):
    def __init__(self, message: str, iterate=None, residual: float | None = None):
        self.iterate = iterate
        self.residual = residual
        super().__init__(message)


class SingularJacobianError(NoConvergenceError):
    """Raised with the numerical nullspace of the offending Jacobian."""

    def __init__(self, message: str, iterate=None, residual: float | None = None, nullspace=None):
        self.nullspace = nullspace
        super().__init__(message, iterate=iterate, residual=residual)


class OrientationFlipError(NumericError):
    pass


class OrientationFlipWarning(RuntimeWarning):
    pass


class NotQuasilinearError(InputError):
    pass


class NotDeterminedError(InputError):
    pass


class IndeterminateError(NumericError):
    pass


class SelectorSplitsPairError(InputError):
    pass


class NearDegenerateError(NumericError):
    pass


class SpectraOverlapError(NumericError):
    pass


class ResonanceError(NumericError):
    def __init__(self, message: str, degree: int):
        self.degree = degree
        super().__init__(f"{message} (degree {degree})")


class DefectiveEigenvalueWarning(RuntimeWarning):
    pass


class DivergenceWarning(RuntimeWarning):
    pass


class EmptyResultError(NumericError):
    pass
