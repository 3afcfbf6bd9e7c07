"""Exception hierarchy for the annulus toolkit.

Every error raised by the numerical modules derives from
``AnnulusError`` and carries an ``exit_code``.  The management command
turns these into ``CommandError`` instances with the same return code,
so the exit-code contract of the CLI is defined in one place:

* 2: malformed input (files, shapes, parameters)
* 3: a singular operator where an invertible one is required
* 4: a class membership or standing hypothesis does not hold
* 5: a numerically ambiguous decision
* 1: any other numerical failure
"""

from __future__ import annotations

from typing import Any, Optional


class AnnulusError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class NotSquareError(AnnulusError, ValueError):
    exit_code = 2


class NonFiniteError(AnnulusError, ValueError):
    exit_code = 2


class InvalidRadiusError(AnnulusError, ValueError):
    exit_code = 2


class TupleFormatError(AnnulusError, ValueError):
    """A tuple file could not be parsed.

    ``position`` names the offending element, e.g. ``operators[1].data[5]``.
    """

    exit_code = 2

    def __init__(self, message: str, position: str = '') -> None:
        self.position = position
        super().__init__(f"{message} (at {position})" if position else message)


class NotHermitianError(AnnulusError, ValueError):
    exit_code = 2

    def __init__(self, residual: float, tolerance: float) -> None:
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(f"matrix is not Hermitian: ||A - A*|| = {residual:.3e} > {tolerance:.3e}")


class SingularOperatorError(AnnulusError, ValueError):
    exit_code = 3

    def __init__(self, smallest_singular_value: float, cutoff: float, label: str = '') -> None:
        self.smallest_singular_value = smallest_singular_value
        self.cutoff = cutoff
        what = f"{label} " if label else ''
        super().__init__(
            f"operator {what}is not invertible: smallest singular value "
            f"{smallest_singular_value:.3e} <= {cutoff:.3e}"
        )


class NotDoublyCommutingError(AnnulusError, ValueError):
    exit_code = 4

    def __init__(self, residual: float, threshold: float) -> None:
        self.residual = residual
        self.threshold = threshold
        super().__init__(
            f"tuple is not doubly commuting: residual {residual:.3e} > {threshold:.3e}"
        )


class MembershipError(AnnulusError, ValueError):
    """An operator fails the class certificate an operation requires."""

    exit_code = 4

    def __init__(self, message: str, certificate: Optional[Any] = None) -> None:
        self.certificate = certificate
        super().__init__(message)


class SpectrumBoundaryError(AnnulusError, ValueError):
    """Eigenvalues sit on (or outside) the boundary of the admissible interval."""

    exit_code = 4


class ClusteringAmbiguityError(AnnulusError):
    exit_code = 5

    def __init__(self, entry: int, left: float, right: float, threshold: float) -> None:
        self.entry = entry
        self.left = left
        self.right = right
        super().__init__(
            f"entry {entry}: eigenvalue clusters {left:.12g} and {right:.12g} are separated by "
            f"{right - left:.3e}, closer than {10 * threshold:.1e} but not merged"
        )


class ExceptionalPointError(AnnulusError, ValueError):
    """Evaluation requested at (or next to) a logarithmic singularity on the circle."""


class OffsetSearchError(AnnulusError):
    pass


class PowerOverflowError(AnnulusError, ValueError):
    exit_code = 2


class WordLengthError(AnnulusError, ValueError):
    exit_code = 2


class DecompositionError(AnnulusError):
    """A block restriction failed its class certificate (tolerance breakdown)."""


class InvalidNodeCountError(AnnulusError, ValueError):
    """Quadrature node counts must be powers of two, at least 16."""

    exit_code = 2
