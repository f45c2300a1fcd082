"""Exception hierarchy shared by all modules.

The CLI maps these onto its exit-code contract: usage problems exit 2,
malformed input files exit 3, and numeric/conditioning failures exit 4.
"""

from __future__ import annotations


class WeakScatterError(Exception):
    """Base class for all toolkit errors."""


class UsageError(WeakScatterError):
    """Bad invocation: invalid flag values, inconsistent options."""


class GridMismatchError(WeakScatterError, ValueError):
    """Two wavefunctions that must share a grid do not."""


class DomainError(WeakScatterError, ValueError):
    """A numeric precondition is violated (negative energy, off-grid
    support, non-Hermitian operator, ...)."""


class ConditioningError(WeakScatterError, ArithmeticError):
    """A ratio is degenerate: near-orthogonal post-selection, zero-norm
    state, dark port of a balanced interferometer."""


class FitRejectedError(ConditioningError):
    """Least-squares fit produced a non-physical result (e.g. a recoil
    curvature that is not positive)."""


class DataFormatError(WeakScatterError, ValueError):
    """Malformed input file.  Carries the offending line number when known."""

    def __init__(self, message: str, *, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)
