"""Generators for example operators and random certified instances.

All generators are pure functions of their parameters (and ``seed``):
the same call always returns bitwise identical matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .exceptions import MembershipError
from .matrix_core import ToleranceConfig, adjoint, as_matrix, identity
from .operator_classes import ClassTag, OperatorTuple, certificate_for, validate_radius

# Fraction of (r, 1) kept clear at both ends for interior singular values.
INTERIOR_MARGIN = 0.05


def _haar_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(G)
    phases = np.diag(R) / np.abs(np.diag(R))
    return Q * phases


def _interior(rng: np.random.Generator, r: float, size: int) -> np.ndarray:
    margin = INTERIOR_MARGIN * (1.0 - r)
    return rng.uniform(r + margin, 1.0 - margin, size)


# ---------------------------------------------------------------------------
# Scalar family


def gen_scalar_family(n: int, r: float, dim: int = 1) -> np.ndarray:
    """``r^{1/(2n)} I``: a c.n.u. ``C_{1,r}`` operator for every ``n >= 1``."""
    n = int(n)
    if n < 1:
        raise ValueError(f"scalar family index must be >= 1, got {n}")
    r = validate_radius(r)
    return r ** (1.0 / (2 * n)) * identity(int(dim))


def scalar_family_defect(n: int, r: float) -> float:
    """``(1 - r^{1/n})(1 - r^2 r^{-1/n})``, the defect of ``gen_scalar_family(n, r)``."""
    root = float(r) ** (1.0 / int(n))
    return (1.0 - root) * (1.0 - float(r) ** 2 / root)


# ---------------------------------------------------------------------------
# Sarason weighted shift


@dataclass(frozen=True)
class SarasonShiftSpec:
    """Cyclic weighted shift on ``e_{-N}, ..., e_N``.

    ``e_n -> alpha_n e_{n+1}`` for ``n < N`` with
    ``alpha_n = sqrt((1 + r^{2(a+n+1)}) / (1 + r^{2(a+n)}))`` and the wrap
    ``e_N -> sqrt(r) e_{-N}``.
    """

    alpha: float
    r: float
    half_width: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError(f"weight exponent alpha={self.alpha!r} must lie in [0, 1)")
        validate_radius(self.r)
        if int(self.half_width) < 1:
            raise ValueError(f"half width must be >= 1, got {self.half_width!r}")

    @property
    def dim(self) -> int:
        return 2 * int(self.half_width) + 1

    @property
    def wrap_weight(self) -> float:
        return float(np.sqrt(self.r))

    def _power(self, n: int) -> float:
        return self.r ** (2.0 * (self.alpha + n))

    def weight(self, n: int) -> float:
        return float(np.sqrt((1.0 + self._power(n + 1)) / (1.0 + self._power(n))))

    def weights(self) -> np.ndarray:
        """``alpha_n`` for ``n = -N, ..., N - 1``."""
        N = int(self.half_width)
        return np.array([self.weight(n) for n in range(-N, N)])

    def scalar_defect(self, n: int) -> float:
        a = self.weight(n)
        return 1.0 + self.r ** 2 - a * a - self.r ** 2 / (a * a)

    def defect_identity(self, n: int) -> float:
        """Closed form of ``scalar_defect(n)``."""
        x = self._power(n)
        return x * (1.0 - self.r ** 2) ** 2 / ((1.0 + x) * (1.0 + self._power(n + 1)))


def gen_sarason(spec: SarasonShiftSpec) -> np.ndarray:
    dim = spec.dim
    S = np.zeros((dim, dim), dtype=np.complex128)
    for i, a in enumerate(spec.weights()):
        S[i + 1, i] = a
    S[0, dim - 1] = spec.wrap_weight
    return S


# ---------------------------------------------------------------------------
# Random tuples and operators


def gen_normal_tuple(seed: int, d: int, dim: int, r: float) -> OperatorTuple:
    """``T_j = Q diag(e^{i theta} lambda) Q*`` with one random unitary ``Q`` and ``lambda`` in ``[r + 0.01, 0.99]``."""
    r = validate_radius(r)
    rng = np.random.default_rng(seed)
    Q = _haar_unitary(rng, int(dim))
    ops = []
    for _ in range(int(d)):
        moduli = rng.uniform(r + 0.01, 0.99, int(dim))
        phases = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, int(dim)))
        ops.append((Q * (phases * moduli)) @ adjoint(Q))
    return OperatorTuple(r=r, ops=tuple(ops))


def gen_tensor_tuple(factors: Sequence, r: float, tol: Optional[ToleranceConfig] = None) -> OperatorTuple:
    """``T_j = I (x) ... (x) A_j (x) ... (x) I`` on the tensor product of the factor spaces."""
    r = validate_radius(r)
    mats = [as_matrix(A, f"factor {j}") for j, A in enumerate(factors)]
    for j, A in enumerate(mats):
        cert = certificate_for(A, r, ClassTag.C1R, tol)
        if not cert.member:
            raise MembershipError(f"tensor factor {j} is not a C1r member", cert)
    dims = [A.shape[0] for A in mats]
    ops = []
    for j, A in enumerate(mats):
        parts = [A if i == j else identity(dims[i]) for i in range(len(mats))]
        ops.append(reduce(np.kron, parts))
    return OperatorTuple(r=r, ops=tuple(ops))


def gen_random_c1r(seed: int, dim: int, r: float) -> np.ndarray:
    """``U diag(s) W*`` with independent random unitaries and ``s`` inside ``(r, 1)``."""
    r = validate_radius(r)
    rng = np.random.default_rng(seed)
    U = _haar_unitary(rng, int(dim))
    W = _haar_unitary(rng, int(dim))
    return (U * _interior(rng, r, int(dim))) @ adjoint(W)


def gen_random_qar(seed: int, dim: int, r: float) -> np.ndarray:
    """A random ``QA_r`` member: ``r^-1`` times a random ``C_{1,r^2}`` member."""
    r = validate_radius(r)
    return gen_random_c1r(seed, dim, r * r) / r


def gen_mixed_c1r(seed: int, dim: int, exact_dim: int, r: float) -> np.ndarray:
    """Random unitary conjugate of (exact part) (+) (c.n.u. part).

    The exact part has singular values in ``{r, 1}``.  The c.n.u. part
    has singular values pinned at ``1`` (and ``r`` when there is room)
    next to interior ones, so its defect has a kernel that does not
    reduce it.
    """
    r = validate_radius(r)
    dim = int(dim)
    exact_dim = int(exact_dim)
    if not (0 <= exact_dim <= dim):
        raise ValueError(f"exact dimension {exact_dim} must lie in [0, {dim}]")
    rng = np.random.default_rng(seed)
    blocks = []
    if exact_dim:
        moduli = np.where(rng.random(exact_dim) < 0.5, r, 1.0)
        U, W = _haar_unitary(rng, exact_dim), _haar_unitary(rng, exact_dim)
        blocks.append((U * moduli) @ adjoint(W))
    cnu_dim = dim - exact_dim
    if cnu_dim:
        values = _interior(rng, r, cnu_dim)
        if cnu_dim >= 2:
            values[0] = 1.0
        if cnu_dim >= 3:
            values[1] = r
        U, W = _haar_unitary(rng, cnu_dim), _haar_unitary(rng, cnu_dim)
        blocks.append((U * values) @ adjoint(W))
    core = np.zeros((dim, dim), dtype=np.complex128)
    offset = 0
    for B in blocks:
        k = B.shape[0]
        core[offset:offset + k, offset:offset + k] = B
        offset += k
    Q = _haar_unitary(rng, dim)
    return Q @ core @ adjoint(Q)


def gen_random_invertible(seed: int, dim: int, scale: float = 1.0) -> np.ndarray:
    """Complex Gaussian matrix scaled by ``scale / sqrt(dim)``; members and non-members alike."""
    rng = np.random.default_rng(seed)
    dim = int(dim)
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return float(scale) * G / np.sqrt(2.0 * dim)
