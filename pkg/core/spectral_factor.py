"""UD factorization, joint spectral resolution and dyadic snapping.

A doubly commuting tuple ``T = (T_1, ..., T_d)`` of invertible matrices
factors as ``T_j = U_j D_j`` with commuting unitaries ``U_j`` and
commuting positive definite ``D_j = (T_j* T_j)^{1/2}``; moreover every
``U_k`` commutes with every ``D_j`` for ``j != k``.  When each ``T_j``
belongs to ``C_{1,r}`` the spectrum of ``D_j`` lies in ``[r, 1]``
(``[r, 1/r]`` for the quantum annulus).

The positive parts are resolved jointly: a simultaneous eigenbasis is
refined entry by entry, eigenvalues are clustered with a fixed gap and
the spectral projections ``P_{j,alpha}`` are assembled from the joint
blocks.  ``snap_spectrum`` then replaces every eigenvalue by the
midpoint of its dyadic cell of ``[r, 1]`` so the snapped spectrum lies
strictly inside ``(r, 1)``, as the dilation pipeline needs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    ClusteringAmbiguityError,
    MembershipError,
    NotDoublyCommutingError,
    SpectrumBoundaryError,
)
from .matrix_core import (
    ToleranceConfig,
    adjoint,
    as_matrix,
    compress,
    configured_default,
    hermitian_eig,
    identity,
    inverse,
    operator_norm,
    polar_decompose,
    projector,
    resolve_tolerances,
)
from .operator_classes import ClassTag, OperatorTuple, certificate_for, is_doubly_commuting

log = logging.getLogger('annulus.spectral')


def _max_pairwise(mats: Sequence[np.ndarray], others: Sequence[np.ndarray]) -> float:
    """``max ||A_i B_j - B_j A_i||`` over ``i != j``."""
    worst = 0.0
    for i, A in enumerate(mats):
        for j, B in enumerate(others):
            if i != j:
                worst = max(worst, operator_norm(A @ B - B @ A))
    return worst


# ---------------------------------------------------------------------------
# UD factorization


@dataclass(frozen=True)
class UDFactorization:
    """Polar factors ``T_j = U_j D_j`` of a doubly commuting tuple."""

    r: float
    operators: Tuple[np.ndarray, ...]
    unitaries: Tuple[np.ndarray, ...]
    positives: Tuple[np.ndarray, ...]
    qa: bool = False
    degraded: bool = False
    relation_residuals: Dict[str, float] = field(default_factory=dict)
    spectral_ranges: Tuple[Tuple[float, float], ...] = ()

    @property
    def d(self) -> int:
        return len(self.unitaries)

    @property
    def dim(self) -> int:
        return self.unitaries[0].shape[0]

    def max_residual(self) -> float:
        return max(self.relation_residuals.values(), default=0.0)

    def to_dict(self) -> Dict[str, object]:
        return {
            'qa': self.qa,
            'degraded': self.degraded,
            'relation_residuals': dict(self.relation_residuals),
            'spectral_ranges': [list(pair) for pair in self.spectral_ranges],
        }


def _relation_residuals(operators, unitaries, positives) -> Dict[str, float]:
    dim = unitaries[0].shape[0]
    eye = identity(dim)
    return {
        'reconstruction': max(operator_norm(U @ D - T) for T, U, D in zip(operators, unitaries, positives)),
        'unitarity': max(operator_norm(adjoint(U) @ U - eye) for U in unitaries),
        'positive_hermitian': max(operator_norm(D - adjoint(D)) for D in positives),
        'UU': _max_pairwise(unitaries, unitaries),
        'DD': _max_pairwise(positives, positives),
        'UD': _max_pairwise(unitaries, positives),
        'TD': _max_pairwise(operators, positives),
    }


def _spectral_window(r: float, qa: bool) -> Tuple[float, float]:
    return (r, 1.0 / r) if qa else (r, 1.0)


def ud_factorize(tup: OperatorTuple, qa: bool = False, tol: Optional[ToleranceConfig] = None) -> UDFactorization:
    """Factor a doubly commuting tuple into commuting unitary and positive parts.

    The factorization is always returned for doubly commuting input; it is
    flagged ``degraded`` when some entry is not in ``C_{1,r}`` (``QA_r``
    with ``qa=True``), since the spectral window claim then fails.
    """
    tol = resolve_tolerances(tol)
    ok, residual = is_doubly_commuting(tup, tol)
    if not ok:
        threshold = tol.eq_tol * max(operator_norm(T) for T in tup.ops) ** 2
        raise NotDoublyCommutingError(residual, threshold)

    unitaries: List[np.ndarray] = []
    positives: List[np.ndarray] = []
    for T in tup.ops:
        U, D = polar_decompose(T, tol)
        unitaries.append(U)
        positives.append(D)

    tag = ClassTag.QAR if qa else ClassTag.C1R
    members = [certificate_for(T, tup.r, tag, tol).member for T in tup.ops]
    degraded = not all(members)

    low, high = _spectral_window(tup.r, qa)
    slack = max(tol.eq_tol, tol.psd_tol) * max(1.0, high)
    ranges = []
    for j, D in enumerate(positives):
        eigenvalues, _ = hermitian_eig(D, tol)
        ranges.append((float(eigenvalues[0]), float(eigenvalues[-1])))
        if members[j] and not (low - slack <= eigenvalues[0] and eigenvalues[-1] <= high + slack):
            log.warning(
                f"[factor] entry {j}: spectrum of D [{eigenvalues[0]:.15g}, {eigenvalues[-1]:.15g}] "
                f"leaves [{low:.15g}, {high:.15g}] despite the class certificate"
            )
    if degraded:
        failing = [j for j, m in enumerate(members) if not m]
        log.warning(f"[factor] entries {failing} are not {tag.value} members; factorization is degraded")

    residuals = _relation_residuals(tup.ops, unitaries, positives)
    log.debug(f"[factor] d={tup.d} dim={tup.dim} worst relation residual {max(residuals.values()):.3e}")
    return UDFactorization(
        r=tup.r,
        operators=tuple(tup.ops),
        unitaries=tuple(unitaries),
        positives=tuple(positives),
        qa=qa,
        degraded=degraded,
        relation_residuals=residuals,
        spectral_ranges=tuple(ranges),
    )


def compose_ud(
    unitaries: Sequence[np.ndarray],
    positives: Sequence[np.ndarray],
    r: float,
    qa: bool = False,
    tol: Optional[ToleranceConfig] = None,
) -> OperatorTuple:
    """Rebuild ``T_j = U_j D_j`` and certify the result.

    Commuting unitaries and commuting positive parts whose spectra lie in
    the annulus window give a doubly commuting tuple of ``C_{1,r}``
    (``QA_r``) members; anything else is rejected.
    """
    tol = resolve_tolerances(tol)
    if len(unitaries) != len(positives):
        raise ValueError('compose_ud needs as many unitaries as positive parts')
    ops = [as_matrix(U, 'unitary') @ as_matrix(D, 'positive part') for U, D in zip(unitaries, positives)]
    tup = OperatorTuple(r=float(r), ops=tuple(ops))
    ok, residual = is_doubly_commuting(tup, tol)
    if not ok:
        raise NotDoublyCommutingError(residual, tol.eq_tol * max(operator_norm(T) for T in ops) ** 2)
    tag = ClassTag.QAR if qa else ClassTag.C1R
    for j, T in enumerate(ops):
        cert = certificate_for(T, tup.r, tag, tol)
        if not cert.member:
            raise MembershipError(f"composed entry {j} is not a {tag.value} member", cert)
    return tup


# ---------------------------------------------------------------------------
# Joint spectral resolution


@dataclass(frozen=True)
class EntryResolution:
    """Spectral projections of one positive part, in ascending eigenvalue order."""

    eigenvalues: np.ndarray
    projections: Tuple[np.ndarray, ...]

    @property
    def m(self) -> int:
        return len(self.projections)

    def reconstruct(self) -> np.ndarray:
        return sum(lam * P for lam, P in zip(self.eigenvalues, self.projections))


@dataclass(frozen=True)
class SpectralResolution:
    """Per-entry resolutions plus the joint blocks they were built from.

    ``joint_points[k]`` is the joint eigenvalue tuple on the orthonormal
    block ``joint_bases[k]``; ``joint_labels[k][j]`` indexes the cluster of
    entry ``j``.
    """

    entries: Tuple[EntryResolution, ...]
    joint_points: np.ndarray
    joint_labels: Tuple[Tuple[int, ...], ...]
    joint_bases: Tuple[np.ndarray, ...]
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def d(self) -> int:
        return len(self.entries)

    def joint_projections(self) -> List[np.ndarray]:
        return [projector(B) for B in self.joint_bases]

    def to_dict(self) -> Dict[str, object]:
        return {
            'entries': [
                {'eigenvalues': e.eigenvalues.tolist(), 'ranks': [int(round(np.trace(P).real)) for P in e.projections]}
                for e in self.entries
            ],
            'joint_points': self.joint_points.tolist(),
            'residuals': dict(self.residuals),
        }


def _cluster(eigenvalues: np.ndarray, gap: float, entry: int) -> np.ndarray:
    """Cluster centers of ascending eigenvalues split at jumps larger than ``gap``."""
    groups: List[List[float]] = [[float(eigenvalues[0])]]
    for prev, cur in zip(eigenvalues[:-1], eigenvalues[1:]):
        jump = float(cur - prev)
        if jump > gap:
            if jump < 10.0 * gap:
                raise ClusteringAmbiguityError(entry, float(prev), float(cur), gap)
            groups.append([])
        groups[-1].append(float(cur))
    return np.array([np.mean(g) for g in groups])


def _resolution_residuals(entries, positives, unitaries) -> Dict[str, float]:
    dim = positives[0].shape[0]
    eye = identity(dim)
    idempotent = 0.0
    orthogonal = 0.0
    total = 0.0
    reconstruction = 0.0
    for entry, D in zip(entries, positives):
        projections = entry.projections
        for a, P in enumerate(projections):
            idempotent = max(idempotent, operator_norm(P @ P - P), operator_norm(P - adjoint(P)))
            for Q in projections[a + 1:]:
                orthogonal = max(orthogonal, operator_norm(P @ Q))
        total = max(total, operator_norm(sum(projections) - eye))
        reconstruction = max(reconstruction, operator_norm(entry.reconstruct() - D))
    cross = 0.0
    unitary_cross = 0.0
    for i, entry in enumerate(entries):
        for P in entry.projections:
            for j, other in enumerate(entries):
                if j != i:
                    for Q in other.projections:
                        cross = max(cross, operator_norm(P @ Q - Q @ P))
            for k, U in enumerate(unitaries):
                if k != i:
                    unitary_cross = max(unitary_cross, operator_norm(U @ P - P @ U))
    return {
        'idempotent': idempotent,
        'orthogonality': orthogonal,
        'sum_to_identity': total,
        'reconstruction': reconstruction,
        'cross_commutation': cross,
        'unitary_commutation': unitary_cross,
    }


def _assemble(
    centers: Sequence[np.ndarray],
    labels: Sequence[Tuple[int, ...]],
    bases: Sequence[np.ndarray],
    dim: int,
) -> Tuple[Tuple[EntryResolution, ...], np.ndarray]:
    entries = []
    for j, c in enumerate(centers):
        projections = []
        for alpha in range(len(c)):
            P = np.zeros((dim, dim), dtype=np.complex128)
            for label, B in zip(labels, bases):
                if label[j] == alpha:
                    P = P + projector(B)
            projections.append(P)
        entries.append(EntryResolution(eigenvalues=np.asarray(c, dtype=float), projections=tuple(projections)))
    points = np.array([[centers[j][label[j]] for j in range(len(centers))] for label in labels], dtype=float)
    return tuple(entries), points


def joint_spectral_resolution(
    fact: UDFactorization,
    r: Optional[float] = None,
    gap: Optional[float] = None,
    tol: Optional[ToleranceConfig] = None,
) -> SpectralResolution:
    """Simultaneous spectral decomposition of the commuting positive parts.

    Eigenvalues of each ``D_j`` are clustered at ``gap`` (default
    ``ANNULUS_DEFAULTS['cluster_gap']``).  Two clusters separated by less
    than ten gaps are refused with ``ClusteringAmbiguityError``.
    """
    tol = resolve_tolerances(tol)
    gap = float(configured_default('cluster_gap', 1e-8) if gap is None else gap)
    positives = fact.positives
    dim = fact.dim

    commutation = _max_pairwise(positives, positives)
    threshold = tol.eq_tol * max(1.0, max(operator_norm(D) for D in positives) ** 2)
    if commutation > threshold:
        raise NotDoublyCommutingError(commutation, threshold)

    centers = []
    for j, D in enumerate(positives):
        eigenvalues, _ = hermitian_eig(D, tol)
        centers.append(_cluster(eigenvalues, gap, j))

    # refine the joint basis one entry at a time inside each current block
    blocks: List[Tuple[Tuple[int, ...], np.ndarray]] = [((), identity(dim))]
    for j, D in enumerate(positives):
        refined = []
        for label, B in blocks:
            local, Q = hermitian_eig(compress(D, B), tol)
            rotated = B @ Q
            nearest = np.abs(local[:, None] - centers[j][None, :]).argmin(axis=1)
            for alpha in np.unique(nearest):
                refined.append((label + (int(alpha),), rotated[:, nearest == alpha]))
        blocks = refined
    blocks.sort(key=lambda item: item[0])

    labels = tuple(label for label, _ in blocks)
    bases = tuple(B for _, B in blocks)
    entries, points = _assemble(centers, labels, bases, dim)
    residuals = _resolution_residuals(entries, positives, fact.unitaries)
    log.debug(
        f"[resolve] clusters per entry {[len(c) for c in centers]}, {len(blocks)} joint blocks, "
        f"worst residual {max(residuals.values()):.3e}"
    )
    return SpectralResolution(
        entries=entries,
        joint_points=points,
        joint_labels=labels,
        joint_bases=bases,
        residuals=residuals,
    )


# ---------------------------------------------------------------------------
# Dyadic approximation


@dataclass(frozen=True)
class DyadicApproximation:
    """Snapped tuple ``T_{m,j} = U_j s_m(D_j)`` with measured and guaranteed errors."""

    level: int
    r: float
    snapped: Tuple[np.ndarray, ...]
    snapped_tuple: Tuple[np.ndarray, ...]
    forward_errors: Tuple[float, ...]
    inverse_errors: Tuple[float, ...]
    factorization: UDFactorization
    resolution: SpectralResolution

    @property
    def bound(self) -> float:
        return 2.0 ** -self.level

    @property
    def inverse_bound(self) -> float:
        return self.r ** -2 * 2.0 ** -self.level

    @property
    def within_bounds(self) -> bool:
        return max(self.forward_errors) <= self.bound and max(self.inverse_errors) <= self.inverse_bound

    def as_tuple(self) -> OperatorTuple:
        return OperatorTuple(r=self.r, ops=self.snapped_tuple)

    def to_dict(self) -> Dict[str, object]:
        return {
            'level': self.level,
            'bound': self.bound,
            'inverse_bound': self.inverse_bound,
            'forward_errors': list(self.forward_errors),
            'inverse_errors': list(self.inverse_errors),
        }


def snap_to_grid(values: np.ndarray, r: float, m: int) -> np.ndarray:
    """Midpoint of the dyadic cell of ``[r, 1]`` (``2^m`` cells) containing each value."""
    cells = 2 ** m
    step = (1.0 - r) / cells
    k = np.clip(np.floor((np.asarray(values, dtype=float) - r) / step), 0, cells - 1)
    return r + (k + 0.5) * step


def _merge_snapped(
    resolution: SpectralResolution, snapped_centers: Sequence[np.ndarray], dim: int
) -> SpectralResolution:
    merged_centers = []
    remap = []
    for values in snapped_centers:
        unique = np.unique(values)
        merged_centers.append(unique)
        remap.append([int(np.searchsorted(unique, v)) for v in values])

    grouped: Dict[Tuple[int, ...], List[np.ndarray]] = {}
    for label, B in zip(resolution.joint_labels, resolution.joint_bases):
        new_label = tuple(remap[j][alpha] for j, alpha in enumerate(label))
        grouped.setdefault(new_label, []).append(B)
    labels = tuple(sorted(grouped))
    bases = tuple(np.hstack(grouped[label]) for label in labels)
    entries, points = _assemble(merged_centers, labels, bases, dim)
    return SpectralResolution(
        entries=entries,
        joint_points=points,
        joint_labels=labels,
        joint_bases=bases,
        residuals=dict(resolution.residuals),
    )


def snap_spectrum(
    fact: UDFactorization,
    r: Optional[float] = None,
    m: int = 20,
    resolution: Optional[SpectralResolution] = None,
    tol: Optional[ToleranceConfig] = None,
) -> DyadicApproximation:
    """Replace ``D_j`` by ``s_m(D_j)`` so every eigenvalue sits strictly inside ``(r, 1)``.

    ``||T_{m,j} - T_j|| <= 2^-m`` and ``||T_{m,j}^-1 - T_j^-1|| <= r^-2 2^-m``
    are measured and returned; the snapped tuple stays doubly commuting
    since each ``s_m(D_j)`` is a function of ``D_j``.
    """
    tol = resolve_tolerances(tol)
    r = fact.r if r is None else float(r)
    m = int(m)
    if m < 1:
        raise ValueError(f"snap level must be a positive integer, got {m}")
    if resolution is None:
        resolution = joint_spectral_resolution(fact, r, tol=tol)

    slack = max(tol.eq_tol, tol.psd_tol)
    snapped_centers = []
    for j, entry in enumerate(resolution.entries):
        lam = entry.eigenvalues
        if lam[0] < r - slack or lam[-1] > 1.0 + slack:
            raise SpectrumBoundaryError(
                f"entry {j}: eigenvalues [{lam[0]:.15g}, {lam[-1]:.15g}] of D leave [r, 1] = [{r}, 1]"
            )
        snapped_centers.append(snap_to_grid(lam, r, m))

    snapped_positives = []
    snapped_ops = []
    forward = []
    backward = []
    for j, (entry, values) in enumerate(zip(resolution.entries, snapped_centers)):
        Dm = sum(s * P for s, P in zip(values, entry.projections))
        Dm = 0.5 * (Dm + adjoint(Dm))
        Tm = fact.unitaries[j] @ Dm
        T = fact.operators[j]
        snapped_positives.append(Dm)
        snapped_ops.append(Tm)
        forward.append(operator_norm(Tm - T))
        backward.append(operator_norm(inverse(Tm, tol) - inverse(T, tol)))

    merged = _merge_snapped(resolution, snapped_centers, fact.dim)
    snapped_fact = UDFactorization(
        r=r,
        operators=tuple(snapped_ops),
        unitaries=fact.unitaries,
        positives=tuple(snapped_positives),
        qa=False,
        degraded=False,
        relation_residuals=_relation_residuals(snapped_ops, fact.unitaries, snapped_positives),
        spectral_ranges=tuple((float(v.min()), float(v.max())) for v in snapped_centers),
    )
    approx = DyadicApproximation(
        level=m,
        r=r,
        snapped=tuple(snapped_positives),
        snapped_tuple=tuple(snapped_ops),
        forward_errors=tuple(forward),
        inverse_errors=tuple(backward),
        factorization=snapped_fact,
        resolution=merged,
    )
    if not approx.within_bounds:
        log.warning(
            f"[snap] level {m}: measured errors {max(forward):.3e} / {max(backward):.3e} exceed "
            f"{approx.bound:.3e} / {approx.inverse_bound:.3e}"
        )
    else:
        log.info(f"[snap] level {m}: forward error {max(forward):.3e}, inverse error {max(backward):.3e}")
    return approx
