"""Analytic maps from the unit disk onto the annulus ``r < |z| < 1``.

``annulus_map`` is the explicit surjection ``v`` of the disk onto the
annulus with ``v(0) = sqrt(r)``; the upper half of the unit circle is
sent to the inner boundary circle ``|z| = r`` and the lower half to the
outer one.  It is the composition of

* ``z -> (1/pi) Log((1 + z) / (1 - z))``, the disk onto the strip
  ``|Im w| < 1/2``, and
* ``w -> exp(i c w + d)`` with ``c = -log r`` and ``d = (log r) / 2``.

The map is infinitely many-to-one, so preimages are taken on the
imaginary axis.  ``v`` has logarithmic singularities at ``z = +-1``;
after recentering by the Möbius involution ``phi_w0`` those move to
``phi_w0(+-1)``, the exceptional points of the recentered symbol.

Every function accepts scalars or numpy arrays and evaluates
elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .exceptions import ExceptionalPointError, InvalidRadiusError

ArrayLike = Union[complex, float, np.ndarray]

# Neighbourhood of +-1 (and of the recentered images) treated as singular.
EXCEPTIONAL_RADIUS = 1e-9
PREIMAGE_TOL = 1e-10


def _result(value: np.ndarray, like) -> ArrayLike:
    return complex(value) if np.ndim(like) == 0 else value


@dataclass(frozen=True)
class AnnulusMapParams:
    r: float

    def __post_init__(self) -> None:
        if not (0.0 < self.r < 1.0):
            raise InvalidRadiusError(f"radius r={self.r!r} must lie in (0, 1)")

    @property
    def c(self) -> float:
        return -np.log(self.r)

    @property
    def d(self) -> float:
        return 0.5 * np.log(self.r)


def near_exceptional(z: ArrayLike, points, radius: float = EXCEPTIONAL_RADIUS) -> np.ndarray:
    """Mask of entries of ``z`` within ``radius`` of any of ``points``."""
    z = np.asarray(z, dtype=np.complex128)
    points = np.atleast_1d(np.asarray(points, dtype=np.complex128))
    return np.any(np.abs(z[..., None] - points) <= radius, axis=-1)


def annulus_map(z: ArrayLike, r: float) -> ArrayLike:
    """``v(z) = exp(i c w + d)`` with ``w = Log((1 + z) / (1 - z)) / pi``."""
    params = AnnulusMapParams(float(r))
    zz = np.asarray(z, dtype=np.complex128)
    if np.any(near_exceptional(zz, (1.0, -1.0))):
        raise ExceptionalPointError('annulus map evaluated at a logarithmic singularity z = +-1')
    w = np.log((1.0 + zz) / (1.0 - zz)) / np.pi
    return _result(np.exp(1j * params.c * w + params.d), z)


def annulus_preimage(lam: float, r: float) -> complex:
    """The purely imaginary ``w`` in the disk with ``v(w) = lam``."""
    params = AnnulusMapParams(float(r))
    lam = float(lam)
    if not (params.r < lam < 1.0):
        raise InvalidRadiusError(f"target modulus {lam!r} must lie in (r, 1) = ({params.r}, 1)")
    angle = 0.5 * np.pi * (np.log(lam) - params.d) / np.log(params.r)
    w = complex(0.0, np.tan(angle))
    err = abs(annulus_map(w, params.r) - lam)
    if err > PREIMAGE_TOL:
        raise ArithmeticError(f"preimage of {lam!r} misses its target by {err:.3e}")
    return w


def mobius(w0: complex, z: ArrayLike) -> ArrayLike:
    """The disk involution ``(w0 - z) / (1 - conj(w0) z)``."""
    w0 = complex(w0)
    if abs(w0) >= 1.0:
        raise ValueError(f"Möbius centre {w0!r} must lie in the open unit disk")
    zz = np.asarray(z, dtype=np.complex128)
    denom = 1.0 - np.conj(w0) * zz
    if np.any(np.abs(denom) <= np.finfo(float).eps):
        raise ExceptionalPointError(f"Möbius map centred at {w0!r} evaluated at its pole")
    return _result((w0 - zz) / denom, z)


def exceptional_points(w0: complex) -> Tuple[complex, complex]:
    """``(phi_w0(1), phi_w0(-1))``: where the recentered symbol has no boundary value."""
    return complex(mobius(w0, 1.0)), complex(mobius(w0, -1.0))


@dataclass(frozen=True)
class RecenteredSymbolParams:
    """``v o phi_w0`` with ``v(w0) = lam``, so the symbol takes the value ``lam`` at 0."""

    w0: complex
    lam: float
    r: float

    def __post_init__(self) -> None:
        if abs(self.w0) >= 1.0:
            raise ValueError(f"centre {self.w0!r} must lie in the open unit disk")
        err = abs(annulus_map(self.w0, self.r) - self.lam)
        if err > PREIMAGE_TOL:
            raise ValueError(f"v(w0) differs from lambda={self.lam!r} by {err:.3e}")

    @classmethod
    def for_eigenvalue(cls, lam: float, r: float) -> 'RecenteredSymbolParams':
        return cls(w0=annulus_preimage(lam, r), lam=float(lam), r=float(r))

    @property
    def exceptional(self) -> Tuple[complex, complex]:
        return exceptional_points(self.w0)


def recentered_symbol(params: RecenteredSymbolParams, z: ArrayLike) -> ArrayLike:
    zz = np.asarray(z, dtype=np.complex128)
    if np.any(near_exceptional(zz, params.exceptional)):
        raise ExceptionalPointError(
            f"recentered symbol for lambda={params.lam!r} evaluated at an exceptional point"
        )
    return _result(np.asarray(annulus_map(mobius(params.w0, zz), params.r)), z)
