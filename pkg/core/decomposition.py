"""Canonical decomposition into exact-class and completely non-exact parts.

For ``T`` in ``C_{1,r}`` the space splits as ``H = H_1 (+) H_2`` where
``H_1`` is the largest subspace reducing ``T`` on which ``T`` is in the
exact class (the defect vanishes) and ``T|H_2`` has no such subspace
(c.n.u.).  A vector ``x`` lies in ``H_1`` iff ``p(T) x`` lies in the
kernel of the defect for every word ``p`` in ``T`` and ``T*``; in finite
dimensions ``H_1`` is therefore the largest ``{T, T*}``-invariant
subspace of ``ker Delta``, which the fixed-point iteration

    M_0 = ker Delta,   M_{i+1} = {x in M_i : T x in M_i and T* x in M_i}

reaches in at most ``dim`` steps.  ``word_oracle_subspace`` computes the
same subspace by brute force over all words up to a fixed length.

For a doubly commuting tuple every entry's ``H_1`` reduces the other
entries, so splitting entry by entry yields ``2^d`` blocks labelled by
``omega in {t1, t2}^d``.  ``QA_r`` operators are handled through the
scaling ``S in QA_r`` iff ``rS in C_{1,r^2}``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    DecompositionError,
    MembershipError,
    NotDoublyCommutingError,
    WordLengthError,
)
from .matrix_core import (
    ToleranceConfig,
    adjoint,
    as_matrix,
    commutator_norm,
    compress,
    hermitian_eig,
    identity,
    inverse,
    null_space,
    operator_norm,
    orthogonal_complement,
    projector,
    reduction_residual,
    resolve_tolerances,
)
from .operator_classes import (
    ClassTag,
    OperatorTuple,
    certificate_for,
    defect_c1r,
    exact_class_residual,
    is_doubly_commuting,
    qa_to_c1r,
)

log = logging.getLogger('annulus.decomposition')

MAX_WORD_BLOCKS = 6
EXACT = 't1'
CNU = 't2'
RESTRICTION_TOL = 1e-9


# ---------------------------------------------------------------------------
# Word defects


@dataclass(frozen=True)
class WordDefect:
    n: Tuple[int, ...]
    m: Tuple[int, ...]
    matrix: np.ndarray

    @property
    def k(self) -> int:
        return len(self.n)


def word_operator(T: np.ndarray, n: Sequence[int], m: Sequence[int]) -> np.ndarray:
    """``T^{n_1} T*^{m_1} ... T^{n_k} T*^{m_k}``."""
    T = as_matrix(T)
    Th = adjoint(T)
    p = identity(T.shape[0])
    for ni, mi in zip(n, m):
        p = p @ np.linalg.matrix_power(T, int(ni)) @ np.linalg.matrix_power(Th, int(mi))
    return p


def word_defect(T, r: float, n: Sequence[int], m: Sequence[int]) -> WordDefect:
    """``(1+r^2) p*p - (Tp)*(Tp) - r^2 (T^-* p)*(T^-* p)`` for the word ``p = p_{k,nm}(T)``."""
    n = tuple(int(v) for v in n)
    m = tuple(int(v) for v in m)
    if len(n) != len(m):
        raise WordLengthError(f"word exponents must pair up, got {len(n)} and {len(m)}")
    if len(n) > MAX_WORD_BLOCKS:
        raise WordLengthError(f"words are limited to k <= {MAX_WORD_BLOCKS} blocks, got {len(n)}")
    if any(v < 0 for v in n + m):
        raise WordLengthError('word exponents must be non-negative')
    T = as_matrix(T)
    r = float(r)
    p = word_operator(T, n, m)
    Tp = T @ p
    Tinv_h_p = adjoint(inverse(T)) @ p
    D = (1.0 + r * r) * adjoint(p) @ p - adjoint(Tp) @ Tp - r * r * adjoint(Tinv_h_p) @ Tinv_h_p
    return WordDefect(n=n, m=m, matrix=0.5 * (D + adjoint(D)))


def _words_up_to(total: int):
    """All ``(n, m)`` with ``1 <= k <= total`` blocks and ``sum(n) + sum(m) <= total``."""
    for k in range(1, max(total, 1) + 1):
        for exps in itertools.product(range(total + 1), repeat=2 * k):
            if sum(exps) <= total:
                yield exps[:k], exps[k:]


# ---------------------------------------------------------------------------
# The exact part


def maximal_exact_subspace(T: np.ndarray, r: float, kernel_tol: float) -> np.ndarray:
    """Orthonormal basis of the largest ``{T, T*}``-invariant subspace of ``ker Delta``."""
    dim = T.shape[0]
    if dim == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    Th = adjoint(T)
    B = null_space(defect_c1r(T, r), tol=kernel_tol, scale=1.0 + r * r)
    scale = max(1.0, operator_norm(T))
    for _ in range(dim + 1):
        if B.shape[1] == 0:
            break
        Q = identity(dim) - projector(B)
        escape = np.vstack([Q @ T @ B, Q @ Th @ B])
        K = null_space(escape, tol=kernel_tol, scale=scale)
        if K.shape[1] == B.shape[1]:
            break
        B = B @ K
    return B


def word_oracle_subspace(T, r: float, max_length: int, tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """``{x : Delta^{1/2} p(T) x = 0}`` over every word ``p`` in ``T, T*`` of length ``<= max_length``."""
    tol = resolve_tolerances(tol)
    T = as_matrix(T)
    eigenvalues, Q = hermitian_eig(defect_c1r(T, r, tol), tol)
    # eigenvalues at rounding level are zeroed before the square root
    kept = np.where(eigenvalues > tol.psd_tol * (1.0 + r * r), eigenvalues, 0.0)
    root = (Q * np.sqrt(kept)) @ adjoint(Q)
    letters = (T, adjoint(T))
    level = [identity(T.shape[0])]
    rows = [root]
    for _ in range(int(max_length)):
        level = [L @ p for L in letters for p in level]
        rows.extend(root @ p for p in level)
    return null_space(np.vstack(rows), tol=np.sqrt(tol.kernel_tol), scale=1.0 + r * r)


@dataclass
class Block:
    omega: Tuple[str, ...]
    basis: np.ndarray
    certificates: Dict[str, object] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def label(self) -> str:
        if len(self.omega) == 1:
            return 'exact' if self.omega[0] == EXACT else 'cnu'
        return ','.join(self.omega)

    def projector(self) -> np.ndarray:
        return projector(self.basis)

    def to_dict(self, include_basis: bool = True) -> Dict[str, object]:
        out: Dict[str, object] = {
            'omega': list(self.omega),
            'label': self.label,
            'dim': self.dim,
            'certificates': self.certificates,
        }
        if include_basis:
            out['basis'] = [[[float(z.real), float(z.imag)] for z in row] for row in self.basis]
        return out


@dataclass
class DecompositionResult:
    blocks: List[Block]
    ambiguous: bool = False
    residuals: Dict[str, float] = field(default_factory=dict)

    def projectors(self) -> List[np.ndarray]:
        return [b.projector() for b in self.blocks]

    def block(self, *omega: str) -> Block:
        for b in self.blocks:
            if b.omega == tuple(omega):
                return b
        raise KeyError(omega)

    def to_dict(self, include_basis: bool = True) -> Dict[str, object]:
        return {
            'ambiguous': self.ambiguous,
            'residuals': dict(self.residuals),
            'blocks': [b.to_dict(include_basis) for b in self.blocks],
        }


def _exact_certificate(T: np.ndarray, r: float, tol: ToleranceConfig) -> Dict[str, object]:
    if T.shape[0] == 0:
        return {'class': 'exact', 'residual': 0.0, 'passes': True}
    residual = exact_class_residual(T, r, ClassTag.EXACT_C1R, tol)
    return {'class': 'exact', 'residual': residual, 'passes': residual <= RESTRICTION_TOL}


def _cnu_certificate(T: np.ndarray, r: float, tol: ToleranceConfig) -> Dict[str, object]:
    if T.shape[0] == 0:
        return {'class': 'cnu', 'iterated_kernel_dim': 0, 'min_defect_eig': None, 'passes': True}
    inner = maximal_exact_subspace(T, r, tol.kernel_tol)
    eigenvalues, _ = hermitian_eig(defect_c1r(T, r, tol), tol)
    return {
        'class': 'cnu',
        'iterated_kernel_dim': int(inner.shape[1]),
        'min_defect_eig': float(eigenvalues[0]),
        'passes': inner.shape[1] == 0,
    }


def _split(T: np.ndarray, r: float, tol: ToleranceConfig) -> Tuple[np.ndarray, np.ndarray, bool]:
    """``(H_1 basis, H_2 basis, ambiguous)`` for one ``C_{1,r}`` matrix."""
    B1 = maximal_exact_subspace(T, r, tol.kernel_tol)
    dims = {
        maximal_exact_subspace(T, r, tol.kernel_tol * factor).shape[1] for factor in (0.1, 10.0)
    }
    ambiguous = dims != {B1.shape[1]}
    if ambiguous:
        log.warning(
            f"[decompose] exact part dimension {B1.shape[1]} is unstable under a 10x change of "
            f"kernel_tol (saw {sorted(dims)})"
        )
    B2 = orthogonal_complement(B1, T.shape[0])
    return B1, B2, ambiguous


def _require_members(ops: Sequence[np.ndarray], r: float, tag: ClassTag, tol: ToleranceConfig) -> None:
    for j, T in enumerate(ops):
        cert = certificate_for(T, r, tag, tol)
        if not cert.member:
            raise MembershipError(f"entry {j} is not a {tag.value} member", cert)


def _partition_residuals(blocks: Sequence[Block], ops: Sequence[np.ndarray]) -> Dict[str, float]:
    dim = ops[0].shape[0]
    projections = [b.projector() for b in blocks]
    orthogonality = 0.0
    for a, P in enumerate(projections):
        for Q in projections[a + 1:]:
            orthogonality = max(orthogonality, operator_norm(P @ Q))
    reduction = max(
        (reduction_residual(T, b.basis) for b in blocks for T in ops if b.dim), default=0.0
    )
    return {
        'sum_to_identity': operator_norm(sum(projections) - identity(dim)),
        'orthogonality': orthogonality,
        'reduction': reduction,
    }


def canonical_decompose(T, r: float, tol: Optional[ToleranceConfig] = None, qa: bool = False) -> DecompositionResult:
    """Split ``T`` into its exact part and its c.n.u. part.

    With ``qa=True`` ``T`` must be a ``QA_r`` member and the split is that
    of ``rT`` in ``C_{1,r^2}``; the exact part is then exact ``QA_r``.
    """
    tol = resolve_tolerances(tol)
    T = as_matrix(T)
    r = float(r)
    if qa:
        _require_members([T], r, ClassTag.QAR, tol)
        work, work_r = qa_to_c1r(T, r)
    else:
        _require_members([T], r, ClassTag.C1R, tol)
        work, work_r = T, r

    B1, B2, ambiguous = _split(work, work_r, tol)
    blocks = [
        Block((EXACT,), B1, _exact_certificate(compress(work, B1), work_r, tol)),
        Block((CNU,), B2, _cnu_certificate(compress(work, B2), work_r, tol)),
    ]
    residuals = _partition_residuals(blocks, [T])
    failed = [b.label for b in blocks if not b.certificates['passes']]
    if failed and not ambiguous:
        raise DecompositionError(f"restriction certificates failed for {failed}")
    log.info(f"[decompose] dim={T.shape[0]} exact={B1.shape[1]} cnu={B2.shape[1]} ambiguous={ambiguous}")
    return DecompositionResult(blocks=blocks, ambiguous=ambiguous, residuals=residuals)


# ---------------------------------------------------------------------------
# Tuples


@dataclass(frozen=True)
class CrossReductionReport:
    holds: bool
    reduction_residual: float
    commutator_residual: float

    def __bool__(self) -> bool:
        return self.holds


def cross_reduction_check(
    A, B, r: float, tol: Optional[ToleranceConfig] = None, max_word: int = 3
) -> CrossReductionReport:
    """Check that the exact part of ``A`` reduces ``B`` and every word defect of ``A`` commutes with ``B, B*``."""
    tol = resolve_tolerances(tol)
    pair = OperatorTuple.of(r, A, B)
    ok, residual = is_doubly_commuting(pair, tol)
    if not ok:
        raise NotDoublyCommutingError(residual, tol.eq_tol * max(operator_norm(T) for T in pair.ops) ** 2)
    _require_members(pair.ops, pair.r, ClassTag.C1R, tol)
    A, B = pair.ops
    H1 = maximal_exact_subspace(A, pair.r, tol.kernel_tol)
    reduction = reduction_residual(B, H1)
    Bh = adjoint(B)
    commutators = 0.0
    for n, m in _words_up_to(max_word):
        D = word_defect(A, pair.r, n, m).matrix
        commutators = max(commutators, commutator_norm(D, B), commutator_norm(D, Bh))
    holds = reduction <= RESTRICTION_TOL and commutators <= RESTRICTION_TOL
    return CrossReductionReport(holds=holds, reduction_residual=reduction, commutator_residual=commutators)


def tuple_decompose(
    tup: OperatorTuple,
    qa: bool = False,
    tol: Optional[ToleranceConfig] = None,
    order: Optional[Sequence[int]] = None,
) -> DecompositionResult:
    """The ``2^d`` decomposition of a doubly commuting tuple.

    Entries are split one after the other (in ``order``, default
    ``0..d-1``) inside the blocks produced so far.  Every ``omega`` in
    ``{t1, t2}^d`` appears exactly once, empty blocks included, in
    lexicographic order.
    """
    tol = resolve_tolerances(tol)
    ok, residual = is_doubly_commuting(tup, tol)
    if not ok:
        raise NotDoublyCommutingError(residual, tol.eq_tol * max(operator_norm(T) for T in tup.ops) ** 2)
    if qa:
        _require_members(tup.ops, tup.r, ClassTag.QAR, tol)
        scaled = [qa_to_c1r(T, tup.r) for T in tup.ops]
        work = [S for S, _ in scaled]
        work_r = scaled[0][1]
    else:
        _require_members(tup.ops, tup.r, ClassTag.C1R, tol)
        work = list(tup.ops)
        work_r = tup.r

    order = list(range(tup.d)) if order is None else [int(j) for j in order]
    if sorted(order) != list(range(tup.d)):
        raise ValueError(f"order must be a permutation of 0..{tup.d - 1}, got {order}")

    ambiguous = False
    partial: List[Tuple[Dict[int, str], np.ndarray]] = [({}, identity(tup.dim))]
    for j in order:
        refined = []
        for labels, basis in partial:
            if basis.shape[1] == 0:
                empty = np.zeros((tup.dim, 0), dtype=np.complex128)
                refined.append(({**labels, j: EXACT}, empty))
                refined.append(({**labels, j: CNU}, empty))
                continue
            local = compress(work[j], basis)
            B1, B2, unstable = _split(local, work_r, tol)
            ambiguous = ambiguous or unstable
            refined.append(({**labels, j: EXACT}, basis @ B1))
            refined.append(({**labels, j: CNU}, basis @ B2))
        partial = refined

    blocks = []
    for labels, basis in partial:
        omega = tuple(labels[j] for j in range(tup.d))
        certificates = {}
        for j, T in enumerate(work):
            restricted = compress(T, basis)
            if omega[j] == EXACT:
                certificates[f"entry{j}"] = _exact_certificate(restricted, work_r, tol)
            else:
                certificates[f"entry{j}"] = _cnu_certificate(restricted, work_r, tol)
        blocks.append(Block(omega, basis, certificates))
    blocks.sort(key=lambda b: b.omega)

    residuals = _partition_residuals(blocks, tup.ops)
    failures = [
        (b.omega, key) for b in blocks for key, cert in b.certificates.items() if not cert['passes']
    ]
    if not ambiguous and (failures or residuals['reduction'] > RESTRICTION_TOL):
        raise DecompositionError(
            f"block restrictions failed (certificates {failures}, reduction residual {residuals['reduction']:.3e})"
        )
    dims = {','.join(b.omega): b.dim for b in blocks}
    log.info(f"[decompose] d={tup.d} block dims {dims} ambiguous={ambiguous}")
    return DecompositionResult(blocks=blocks, ambiguous=ambiguous, residuals=residuals)
