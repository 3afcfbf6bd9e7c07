"""Dense complex linear algebra primitives.

Every other module in the toolkit works on plain ``numpy`` arrays of
dtype ``complex128`` and reaches for the helpers below instead of
calling LAPACK wrappers directly.  The helpers add the validation the
operator-theoretic code relies on (squareness, finiteness, Hermitian
symmetry within tolerance, invertibility) and fix conventions that make
results reproducible across runs: eigenvalues come back in ascending
order and every eigenvector has its first non-negligible component made
real and positive.

Tolerances are bundled in ``ToleranceConfig``.  Functions taking
``tol=None`` use ``ToleranceConfig.from_settings()``, which reads
``settings.ANNULUS_TOLERANCES`` when a Django settings module is
configured and falls back to the hard defaults otherwise.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .exceptions import NonFiniteError, NotHermitianError, NotSquareError, SingularOperatorError

# Components smaller than this are skipped when fixing eigenvector phases.
_PHASE_FLOOR = 1e-12


@dataclass(frozen=True)
class ToleranceConfig:
    eq_tol: float = 1e-10
    psd_tol: float = 1e-10
    kernel_tol: float = 1e-8

    def __post_init__(self) -> None:
        for name in ('eq_tol', 'psd_tol', 'kernel_tol'):
            value = getattr(self, name)
            if not (0.0 <= value < 1.0):
                raise ValueError(f"tolerance {name}={value!r} must lie in [0, 1)")

    @classmethod
    def from_settings(cls) -> 'ToleranceConfig':
        """Build the configured tolerances (hard defaults without Django settings)."""
        from django.conf import settings

        if not settings.configured and 'DJANGO_SETTINGS_MODULE' not in os.environ:
            return cls()
        values = getattr(settings, 'ANNULUS_TOLERANCES', None) or {}
        return cls(**values)

    def as_dict(self) -> dict:
        return {'eq_tol': self.eq_tol, 'psd_tol': self.psd_tol, 'kernel_tol': self.kernel_tol}


def resolve_tolerances(tol: Optional[ToleranceConfig]) -> ToleranceConfig:
    return tol if tol is not None else ToleranceConfig.from_settings()


def configured_default(key: str, fallback):
    """Look up ``settings.ANNULUS_DEFAULTS[key]``, or ``fallback`` without settings."""
    from django.conf import settings

    if not settings.configured and 'DJANGO_SETTINGS_MODULE' not in os.environ:
        return fallback
    return (getattr(settings, 'ANNULUS_DEFAULTS', None) or {}).get(key, fallback)


class PsdWitness(NamedTuple):
    holds: bool
    min_eigenvalue: float


# ---------------------------------------------------------------------------
# Validation and small helpers


def as_matrix(A, label: str = '') -> np.ndarray:
    """Return ``A`` as a finite square ``complex128`` array."""
    M = np.asarray(A, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSquareError(f"{label or 'matrix'} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteError(f"{label or 'matrix'} contains NaN or Inf entries")
    return M


def adjoint(A: np.ndarray) -> np.ndarray:
    return np.conj(A).T


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


def operator_norm(A: np.ndarray) -> float:
    """Largest singular value (0 for empty matrices)."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(sla.svdvals(A)[0])


def smallest_singular_value(A: np.ndarray) -> float:
    A = np.asarray(A)
    if A.size == 0:
        return float('inf')
    return float(sla.svdvals(A)[-1])


def hermitian_residual(A: np.ndarray) -> float:
    return operator_norm(A - adjoint(A))


def commutator_norm(A: np.ndarray, B: np.ndarray) -> float:
    return operator_norm(A @ B - B @ A)


def require_invertible(T: np.ndarray, tol: Optional[ToleranceConfig] = None, label: str = '') -> float:
    """Raise ``SingularOperatorError`` unless the smallest singular value clears ``kernel_tol``."""
    tol = resolve_tolerances(tol)
    smin = smallest_singular_value(T)
    if not smin > tol.kernel_tol:
        raise SingularOperatorError(smin, tol.kernel_tol, label)
    return smin


def inverse(T: np.ndarray, tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    T = as_matrix(T)
    require_invertible(T, tol)
    return sla.inv(T)


def _fix_phases(Q: np.ndarray) -> np.ndarray:
    Q = Q.copy()
    for col in range(Q.shape[1]):
        v = Q[:, col]
        nonzero = np.flatnonzero(np.abs(v) > _PHASE_FLOOR)
        if nonzero.size:
            lead = v[nonzero[0]]
            Q[:, col] = v * (np.conj(lead) / abs(lead))
    return Q


# ---------------------------------------------------------------------------
# Decompositions


def hermitian_eig(A, tol: Optional[ToleranceConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    The input is symmetrized as ``(A + A*) / 2`` before the solve; the
    pre-symmetrization residual must be within ``eq_tol`` (relative to
    ``max(1, ||A||)``).  Returns ascending real eigenvalues and a
    unitary matrix of phase-fixed eigenvectors.
    """
    tol = resolve_tolerances(tol)
    A = as_matrix(A)
    residual = hermitian_residual(A)
    threshold = tol.eq_tol * max(1.0, operator_norm(A))
    if residual > threshold:
        raise NotHermitianError(residual, threshold)
    H = 0.5 * (A + adjoint(A))
    eigenvalues, Q = sla.eigh(H)
    return eigenvalues, _fix_phases(Q)


def sqrtm_psd(A, tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """Square root of a PSD matrix via eigendecomposition, clamping negative rounding at 0."""
    eigenvalues, Q = hermitian_eig(A, tol)
    root = np.sqrt(np.clip(eigenvalues, 0.0, None))
    R = (Q * root) @ adjoint(Q)
    return 0.5 * (R + adjoint(R))


def polar_decompose(T, tol: Optional[ToleranceConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Right polar decomposition ``T = U D`` of an invertible matrix.

    ``D = (T*T)^{1/2}`` is Hermitian positive definite and ``U = T D^{-1}``
    is unitary.
    """
    tol = resolve_tolerances(tol)
    T = as_matrix(T)
    require_invertible(T, tol)
    D = sqrtm_psd(adjoint(T) @ T, tol)
    # U* = D^{-1} T*, solved against the Hermitian factor
    U = adjoint(sla.solve(D, adjoint(T), assume_a='her'))
    return U, D


def null_space(A, tol: Optional[float] = None, scale: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical kernel of ``A``.

    Singular directions with singular value ``<= tol * scale`` span the
    kernel.  ``scale`` defaults to the largest singular value of ``A``
    (1 when ``A`` is zero), which makes the cutoff relative; callers
    working on a known natural scale pass it explicitly.
    """
    A = np.asarray(A, dtype=np.complex128)
    if tol is None:
        tol = ToleranceConfig.from_settings().kernel_tol
    n_cols = A.shape[1]
    if n_cols == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    if A.shape[0] == 0:
        return identity(n_cols)
    _, s, vh = sla.svd(A, full_matrices=True)
    if scale is None:
        scale = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > tol * scale))
    return _fix_phases(adjoint(vh[rank:]))


def is_psd(A, tol: Optional[float] = None, config: Optional[ToleranceConfig] = None) -> PsdWitness:
    """Positivity test with the smallest eigenvalue as witness."""
    config = resolve_tolerances(config)
    if tol is None:
        tol = config.psd_tol
    eigenvalues, _ = hermitian_eig(A, config)
    if eigenvalues.size == 0:
        return PsdWitness(True, float('inf'))
    smallest = float(eigenvalues[0])
    return PsdWitness(smallest >= -tol, smallest)


# ---------------------------------------------------------------------------
# Subspaces given by orthonormal column bases


def projector(basis: np.ndarray) -> np.ndarray:
    return basis @ adjoint(basis)


def compress(A: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``B* A B``, the restriction of ``A`` expressed in the block basis."""
    return adjoint(basis) @ A @ basis


def orthogonal_complement(basis: np.ndarray, dim: int) -> np.ndarray:
    if basis.shape[1] == 0:
        return identity(dim)
    if basis.shape[1] == dim:
        return np.zeros((dim, 0), dtype=np.complex128)
    return null_space(adjoint(basis), tol=0.5, scale=1.0)


def reduction_residual(A: np.ndarray, basis: np.ndarray) -> float:
    """``max(||(I-P) A P||, ||(I-P) A* P||)`` for the projector ``P`` onto the basis span."""
    if basis.shape[1] == 0:
        return 0.0
    P = projector(basis)
    Q = identity(A.shape[0]) - P
    return max(operator_norm(Q @ A @ P), operator_norm(Q @ adjoint(A) @ P))
