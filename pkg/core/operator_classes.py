"""Class membership certificates for annulus-type operator classes.

Four classes are recognised for an invertible matrix ``T`` and a radius
``0 < r < 1``:

``C1r``
    ``||T|| <= 1`` and ``||r T^{-1}|| <= 1``; equivalently the defect
    ``(1 + r^2) I - T*T - r^2 T^{-1} T^{-*}`` is positive semidefinite.
``QAr`` (quantum annulus)
    ``||r T|| <= 1`` and ``||r T^{-1}|| <= 1``; equivalently
    ``(r^{-2} + r^2) I - T*T - T^{-1} T^{-*}`` is positive semidefinite.
``exact_C1r`` / ``exact_QAr``
    the corresponding defect vanishes, i.e. ``T*T`` only has the
    eigenvalues ``{r^2, 1}`` (resp. ``{r^2, r^{-2}}``).

Each membership is decided along two independent routes (norms versus
defect positivity; spectrum of ``T*T`` versus defect norm for the exact
classes) and the certificate records both, so borderline decisions can
be audited.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import InvalidRadiusError, NotSquareError
from .matrix_core import (
    ToleranceConfig,
    adjoint,
    as_matrix,
    hermitian_eig,
    identity,
    inverse,
    is_psd,
    operator_norm,
    require_invertible,
    resolve_tolerances,
)

log = logging.getLogger('annulus.classes')


class ClassTag(str, Enum):
    C1R = 'C1r'
    QAR = 'QAr'
    EXACT_C1R = 'exact_C1r'
    EXACT_QAR = 'exact_QAr'


def validate_radius(r: float, tol: Optional[ToleranceConfig] = None) -> float:
    """Both class definitions degenerate at r in {0, 1}; keep r clear of them."""
    tol = resolve_tolerances(tol)
    r = float(r)
    if not (tol.kernel_tol < r < 1.0 - tol.kernel_tol):
        raise InvalidRadiusError(f"radius r={r!r} must lie in ({tol.kernel_tol}, {1 - tol.kernel_tol})")
    return r


@dataclass(frozen=True)
class OperatorTuple:
    """``d`` invertible matrices on one space together with the radius ``r``."""

    r: float
    ops: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        validate_radius(self.r)
        if not self.ops:
            raise ValueError('an operator tuple needs at least one operator')
        frozen = []
        for j, op in enumerate(self.ops):
            M = as_matrix(op, label=f"operator {j}").copy()
            require_invertible(M, label=f"{j}")
            M.setflags(write=False)
            frozen.append(M)
        dims = {M.shape[0] for M in frozen}
        if len(dims) != 1:
            raise NotSquareError(f"operators must share one dimension, got {sorted(dims)}")
        object.__setattr__(self, 'ops', tuple(frozen))

    @classmethod
    def of(cls, r: float, *ops) -> 'OperatorTuple':
        return cls(r=float(r), ops=tuple(ops))

    @property
    def d(self) -> int:
        return len(self.ops)

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    def __len__(self) -> int:
        return self.d

    def __iter__(self):
        return iter(self.ops)

    def __getitem__(self, j: int) -> np.ndarray:
        return self.ops[j]

    def with_ops(self, ops: Sequence[np.ndarray], r: Optional[float] = None) -> 'OperatorTuple':
        return OperatorTuple(r=self.r if r is None else float(r), ops=tuple(ops))


@dataclass(frozen=True)
class ClassCertificate:
    class_tag: ClassTag
    member: bool
    witness_norms: Tuple[float, float]
    defect_min_eig: float
    defect_residual_norm: Optional[float] = None
    spectrum_residual: Optional[float] = None
    routes_agree: bool = True

    def to_dict(self) -> Dict[str, object]:
        return {
            'class': self.class_tag.value,
            'member': self.member,
            'witness_norms': list(self.witness_norms),
            'defect_min_eig': self.defect_min_eig,
            'defect_residual_norm': self.defect_residual_norm,
            'spectrum_residual': self.spectrum_residual,
            'routes_agree': self.routes_agree,
        }


# ---------------------------------------------------------------------------
# Defect operators


def _gram_inverse(T: np.ndarray, tol: Optional[ToleranceConfig]) -> np.ndarray:
    Tinv = inverse(T, tol)
    return Tinv @ adjoint(Tinv)


def _hermitize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + adjoint(A))


def defect_c1r(T, r: float, tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """``(1 + r^2) I - T*T - r^2 T^{-1} T^{-*}``."""
    T = as_matrix(T)
    r = float(r)
    D = (1.0 + r * r) * identity(T.shape[0]) - adjoint(T) @ T - r * r * _gram_inverse(T, tol)
    return _hermitize(D)


def defect_qar(T, r: float, tol: Optional[ToleranceConfig] = None) -> np.ndarray:
    """``(r^{-2} + r^2) I - T*T - T^{-1} T^{-*}``."""
    T = as_matrix(T)
    r = float(r)
    D = (r ** -2 + r * r) * identity(T.shape[0]) - adjoint(T) @ T - _gram_inverse(T, tol)
    return _hermitize(D)


def _exact_targets(tag: ClassTag, r: float) -> Tuple[float, float]:
    if tag is ClassTag.EXACT_C1R:
        return r * r, 1.0
    if tag is ClassTag.EXACT_QAR:
        return r * r, r ** -2
    raise ValueError(f"{tag} is not an exact class")


def exact_class_residual(T, r: float, tag: ClassTag, tol: Optional[ToleranceConfig] = None) -> float:
    """Largest relative distance of an eigenvalue of ``T*T`` from the class's two moduli."""
    T = as_matrix(T)
    if T.shape[0] == 0:
        return 0.0
    low, high = _exact_targets(tag, float(r))
    gram, _ = hermitian_eig(adjoint(T) @ T, tol)
    distance = np.minimum(np.abs(gram / low - 1.0), np.abs(gram / high - 1.0))
    return float(distance.max())


# ---------------------------------------------------------------------------
# Certificates


def _ordinary_certificate(tag: ClassTag, T: np.ndarray, r: float, tol: ToleranceConfig) -> ClassCertificate:
    norm_T = operator_norm(T)
    norm_rTinv = r * operator_norm(inverse(T, tol))
    if tag is ClassTag.C1R:
        witness = (norm_T, norm_rTinv)
        defect = defect_c1r(T, r, tol)
    else:
        witness = (r * norm_T, norm_rTinv)
        defect = defect_qar(T, r, tol)
    norm_route = all(w <= 1.0 + tol.eq_tol for w in witness)
    positivity = is_psd(defect, config=tol)
    agree = norm_route == positivity.holds
    if not agree:
        log.warning(
            f"[classify] {tag.value}: norm route {norm_route} disagrees with defect route "
            f"(witness norms {witness[0]:.15g}, {witness[1]:.15g}; min defect eig {positivity.min_eigenvalue:.3e})"
        )
    return ClassCertificate(
        class_tag=tag,
        member=norm_route,
        witness_norms=witness,
        defect_min_eig=positivity.min_eigenvalue,
        routes_agree=agree,
    )


def _exact_certificate(tag: ClassTag, T: np.ndarray, r: float, tol: ToleranceConfig) -> ClassCertificate:
    defect = defect_c1r(T, r, tol) if tag is ClassTag.EXACT_C1R else defect_qar(T, r, tol)
    spectrum_residual = exact_class_residual(T, r, tag, tol)
    defect_norm = operator_norm(defect)
    spectrum_route = spectrum_residual <= tol.eq_tol
    defect_route = defect_norm <= tol.eq_tol * max(1.0, r ** -2)
    agree = spectrum_route == defect_route
    if not agree:
        log.warning(
            f"[classify] {tag.value}: spectrum residual {spectrum_residual:.3e} and defect norm "
            f"{defect_norm:.3e} disagree"
        )
    norm_T = operator_norm(T)
    norm_rTinv = r * operator_norm(inverse(T, tol))
    witness = (norm_T, norm_rTinv) if tag is ClassTag.EXACT_C1R else (r * norm_T, norm_rTinv)
    eigenvalues, _ = hermitian_eig(defect, tol)
    return ClassCertificate(
        class_tag=tag,
        member=spectrum_route,
        witness_norms=witness,
        defect_min_eig=float(eigenvalues[0]),
        defect_residual_norm=defect_norm,
        spectrum_residual=spectrum_residual,
        routes_agree=agree,
    )


def classify(T, r: float, tol: Optional[ToleranceConfig] = None) -> List[ClassCertificate]:
    """Certificates for all four classes, in the order C1r, QAr, exact_C1r, exact_QAr."""
    tol = resolve_tolerances(tol)
    r = validate_radius(r, tol)
    T = as_matrix(T)
    require_invertible(T, tol)
    return [
        _ordinary_certificate(ClassTag.C1R, T, r, tol),
        _ordinary_certificate(ClassTag.QAR, T, r, tol),
        _exact_certificate(ClassTag.EXACT_C1R, T, r, tol),
        _exact_certificate(ClassTag.EXACT_QAR, T, r, tol),
    ]


def certificate_for(T, r: float, tag: ClassTag, tol: Optional[ToleranceConfig] = None) -> ClassCertificate:
    tag = ClassTag(tag)
    return {c.class_tag: c for c in classify(T, r, tol)}[tag]


def classify_tuple(tup: OperatorTuple, tol: Optional[ToleranceConfig] = None) -> List[List[ClassCertificate]]:
    return [classify(T, tup.r, tol) for T in tup.ops]


def is_member(T, r: float, tag: ClassTag, tol: Optional[ToleranceConfig] = None) -> bool:
    return certificate_for(T, r, tag, tol).member


# ---------------------------------------------------------------------------
# Scaling correspondence between C_{1,r} and QA_{sqrt r}


def scale_c1r_to_qa(T, r: float) -> Tuple[np.ndarray, float]:
    """``T in C_{1,r}`` iff ``r^{-1/2} T in QA_{sqrt(r)}``."""
    T = as_matrix(T)
    require_invertible(T)
    r = float(r)
    return T / np.sqrt(r), float(np.sqrt(r))


def qa_to_c1r(S, r: float) -> Tuple[np.ndarray, float]:
    """``S in QA_r`` iff ``r S in C_{1,r^2}``."""
    S = as_matrix(S)
    require_invertible(S)
    r = float(r)
    return r * S, r * r


# ---------------------------------------------------------------------------
# Double commutation


def is_doubly_commuting(tup: OperatorTuple, tol: Optional[ToleranceConfig] = None) -> Tuple[bool, float]:
    """``T_i T_j = T_j T_i`` and ``T_i T_j* = T_j* T_i`` for all ``i != j``.

    Returns the verdict and the largest residual; the threshold is
    ``eq_tol * max ||T_i||^2``.
    """
    tol = resolve_tolerances(tol)
    ops = tup.ops if isinstance(tup, OperatorTuple) else tuple(as_matrix(T) for T in tup)
    residual = 0.0
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            A, B = ops[i], ops[j]
            residual = max(
                residual,
                operator_norm(A @ B - B @ A),
                operator_norm(A @ adjoint(B) - adjoint(B) @ A),
            )
    scale = max(operator_norm(T) for T in ops) ** 2
    return residual <= tol.eq_tol * scale, residual


@dataclass
class TupleCertificate:
    """Per-entry certificates plus the tuple-level double commutation residual."""

    entries: List[List[ClassCertificate]] = field(default_factory=list)
    doubly_commuting: bool = True
    commutation_residual: float = 0.0

    def members(self, tag: ClassTag) -> List[bool]:
        tag = ClassTag(tag)
        return [next(c.member for c in certs if c.class_tag is tag) for certs in self.entries]


def certify_tuple(tup: OperatorTuple, tol: Optional[ToleranceConfig] = None) -> TupleCertificate:
    ok, residual = is_doubly_commuting(tup, tol)
    return TupleCertificate(entries=classify_tuple(tup, tol), doubly_commuting=ok, commutation_residual=residual)
