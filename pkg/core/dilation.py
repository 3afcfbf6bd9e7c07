"""Quadrature dilation of doubly commuting ``C_{1,r}`` and ``QA_r`` tuples.

The pipeline follows the boundary-symbol construction:

1. factor ``T_j = U_j D_j`` and resolve ``D_j = sum_a lambda_{j,a} P_{j,a}``
   (``spectral_factor``), snapping the spectrum into ``(r, 1)`` first
   when it touches the boundary;
2. pick for every eigenvalue the recentered annulus symbol
   ``v_{j,a} = v o phi_{w_{j,a}}`` with ``v_{j,a}(0) = lambda_{j,a}``
   (``conformal``) and form ``F_j(z) = sum_a v_{j,a}(z) U_j P_{j,a}``;
3. discretize ``L^2(T) (x) H`` by ``N`` equally weighted nodes on the unit
   circle.  ``M_j`` becomes the block diagonal matrix of the node values
   ``F_j(zeta_k)`` and ``V h = (h, ..., h) / sqrt(N)``.

On the circle every ``|v_{j,a}|`` equals ``r`` or ``1``, so each node
block lies in the exact class: ``F* F`` only has the eigenvalues
``r^2`` and ``1``.  The only approximate step is ``V* M^n V`` versus
``T^n``, a trapezoid rule for Cauchy's formula whose error
``verify_moments`` tabulates.

``QA_r`` tuples are dilated through the scaling ``T in QA_r`` iff
``rT in C_{1,r^2}``: the ``C_{1,r^2}`` model of ``rT`` is built and its
node blocks are scaled by ``1/r``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg as sla

from .conformal import RecenteredSymbolParams, recentered_symbol
from .exceptions import (
    InvalidNodeCountError,
    MembershipError,
    OffsetSearchError,
    PowerOverflowError,
    SpectrumBoundaryError,
)
from .matrix_core import (
    ToleranceConfig,
    configured_default,
    identity,
    operator_norm,
    resolve_tolerances,
)
from .operator_classes import ClassTag, OperatorTuple, certificate_for, qa_to_c1r
from .spectral_factor import (
    DyadicApproximation,
    joint_spectral_resolution,
    snap_spectrum,
    ud_factorize,
)

log = logging.getLogger('annulus.dilation')

GOLDEN_START = 0.3819660112501051
GOLDEN_STEP = 0.6180339887498949
OFFSET_RETRIES = 64
OFFSET_WINDOW = (0.1, 0.9)
MAX_POWER = 12
# Moment evaluation caches per-entry node powers while they fit in this many bytes.
POWER_CACHE_BYTES = 256 * 1024 * 1024


def _batched_adjoint(B: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(B, -1, -2))


def _batched_norm(B: np.ndarray) -> np.ndarray:
    if B.shape[-1] == 0:
        return np.zeros(B.shape[:-2])
    return np.linalg.norm(B, ord=2, axis=(-2, -1))


# ---------------------------------------------------------------------------
# Symbols


@dataclass(frozen=True)
class SymbolFamily:
    """Matrix symbols ``F_j(z) = sum_a v_{j,a}(z) U_j P_{j,a}``.

    ``targets`` are the operators the symbols reproduce at ``z = 0``: the
    input tuple, or its dyadic snap when ``snap`` is set.
    """

    r: float
    unitaries: Tuple[np.ndarray, ...]
    projections: Tuple[Tuple[np.ndarray, ...], ...]
    params: Tuple[Tuple[RecenteredSymbolParams, ...], ...]
    targets: Tuple[np.ndarray, ...]
    source: Tuple[np.ndarray, ...]
    snap: Optional[DyadicApproximation] = None
    origin_residual: float = 0.0

    @property
    def d(self) -> int:
        return len(self.unitaries)

    @property
    def dim(self) -> int:
        return self.unitaries[0].shape[0]

    @property
    def snap_level(self) -> Optional[int]:
        return self.snap.level if self.snap is not None else None

    def exceptional_points(self) -> np.ndarray:
        points = [p for row in self.params for prm in row for p in prm.exceptional]
        return np.array(points, dtype=np.complex128)

    def evaluate_many(self, j: int, z: np.ndarray) -> np.ndarray:
        """``F_j`` at every point of ``z``; shape ``(len(z), dim, dim)``."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        U = self.unitaries[j]
        out = np.zeros((z.size, self.dim, self.dim), dtype=np.complex128)
        for prm, P in zip(self.params[j], self.projections[j]):
            values = np.asarray(recentered_symbol(prm, z))
            out += values[:, None, None] * (U @ P)[None, :, :]
        return out

    def evaluate(self, j: int, z: complex) -> np.ndarray:
        return self.evaluate_many(j, np.array([z]))[0]

    def commutation_residual(self, z: np.ndarray) -> float:
        """Largest ``F_i F_j - F_j F_i`` and ``F_i F_j* - F_j* F_i`` over the points ``z``."""
        values = [self.evaluate_many(j, z) for j in range(self.d)]
        return _pairwise_block_commutation(values)


def _pairwise_block_commutation(blocks: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            A, B = blocks[i], blocks[j]
            Bh = _batched_adjoint(B)
            worst = max(
                worst,
                float(_batched_norm(A @ B - B @ A).max(initial=0.0)),
                float(_batched_norm(A @ Bh - Bh @ A).max(initial=0.0)),
            )
    return worst


def _strictly_inside(entries, r: float, margin: float) -> bool:
    return all(e.eigenvalues[0] > r + margin and e.eigenvalues[-1] < 1.0 - margin for e in entries)


def build_symbols(
    tup: OperatorTuple,
    snap_level: Optional[int] = None,
    force_snap: bool = False,
    tol: Optional[ToleranceConfig] = None,
) -> SymbolFamily:
    """Boundary symbols for a doubly commuting tuple of ``C_{1,r}`` members.

    The spectrum of every ``D_j`` must lie strictly inside ``(r, 1)``.  If
    it does not, ``snap_level`` must be given and the symbols are built
    for the dyadic snap at that level; ``force_snap`` snaps regardless.
    """
    tol = resolve_tolerances(tol)
    fact = ud_factorize(tup, tol=tol)
    if fact.degraded:
        for j, T in enumerate(tup.ops):
            cert = certificate_for(T, tup.r, ClassTag.C1R, tol)
            if not cert.member:
                raise MembershipError(f"entry {j} is not a C1r member", cert)
    resolution = joint_spectral_resolution(fact, tup.r, tol=tol)

    snap = None
    inside = _strictly_inside(resolution.entries, tup.r, tol.kernel_tol)
    if force_snap or not inside:
        if snap_level is None:
            raise SpectrumBoundaryError(
                f"spectrum of |T_j| is not strictly inside (r, 1) = ({tup.r}, 1); a snap level is required"
            )
        snap = snap_spectrum(fact, tup.r, snap_level, resolution, tol)
        if not inside:
            log.warning(f"[symbols] spectrum touches the boundary of (r, 1); dilating the level-{snap_level} snap")
        fact = snap.factorization
        resolution = snap.resolution

    params = tuple(
        tuple(RecenteredSymbolParams.for_eigenvalue(lam, tup.r) for lam in entry.eigenvalues)
        for entry in resolution.entries
    )
    projections = tuple(entry.projections for entry in resolution.entries)
    sym = SymbolFamily(
        r=tup.r,
        unitaries=fact.unitaries,
        projections=projections,
        params=params,
        targets=fact.operators,
        source=tuple(tup.ops),
    )
    origin = max(operator_norm(sym.evaluate(j, 0.0) - sym.targets[j]) for j in range(sym.d))
    sym = replace(sym, snap=snap, origin_residual=origin)
    log.debug(f"[symbols] d={sym.d} dim={sym.dim} F(0) residual {origin:.3e}")
    return sym


# ---------------------------------------------------------------------------
# Quadrature model


@dataclass(frozen=True)
class DilationModel:
    """Node blocks ``F_j(zeta_k)`` of the discretized multiplication operators.

    ``blocks`` has shape ``(d, N, dim, dim)``.  ``r`` is the radius of the
    class the node blocks belong to: for ``qa=True`` the blocks are in the
    exact ``QA_r`` class (``F* F`` takes ``node_targets = (r^2, r^-2)``);
    otherwise in the exact ``C_{1,r}`` class with targets ``(r^2, 1)``.
    """

    r: float
    N: int
    offset: float
    nodes: np.ndarray
    blocks: np.ndarray
    targets: Tuple[np.ndarray, ...]
    clearance: float
    node_targets: Tuple[float, float]
    scale: float = 1.0
    qa: bool = False
    offset_fallback: bool = False
    snap: Optional[DyadicApproximation] = None
    symbols: Optional[SymbolFamily] = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.blocks.shape[0]

    @property
    def dim(self) -> int:
        return self.blocks.shape[-1]

    @property
    def snap_level(self) -> Optional[int]:
        return self.snap.level if self.snap is not None else None

    def isometry(self) -> np.ndarray:
        """``V``: ``h -> (h, ..., h) / sqrt(N)`` as an ``(N dim) x dim`` matrix."""
        column = np.full((self.N, 1), 1.0 / np.sqrt(self.N))
        return np.kron(column, identity(self.dim))

    def multiplication_operator(self, j: int) -> np.ndarray:
        return sla.block_diag(*self.blocks[j])

    def to_dict(self) -> Dict[str, object]:
        def pairs(M: np.ndarray) -> List[List[float]]:
            flat = M.reshape(-1)
            return [[float(z.real), float(z.imag)] for z in flat]

        return {
            'r': self.r,
            'N': self.N,
            'offset': self.offset,
            'offset_fallback': self.offset_fallback,
            'clearance': self.clearance,
            'scale': self.scale,
            'qa': self.qa,
            'snap_level': self.snap_level,
            'dim': self.dim,
            'nodes': [[float(z.real), float(z.imag)] for z in self.nodes],
            'blocks': [[pairs(B) for B in entry] for entry in self.blocks],
        }


def _validate_node_count(N: int) -> int:
    N = int(N)
    if N < 16 or N & (N - 1):
        raise InvalidNodeCountError(f"node count must be a power of two >= 16, got {N}")
    return N


def _node_positions(points: np.ndarray, N: int) -> np.ndarray:
    """Exceptional points as fractional grid positions in ``[0, 1)``."""
    if points.size == 0:
        return np.zeros(0)
    angles = np.mod(np.angle(points), 2.0 * np.pi)
    return np.mod(angles * N / (2.0 * np.pi), 1.0)


def _cell_clearance(positions: np.ndarray, offset: float) -> float:
    if positions.size == 0:
        return 0.5
    u = positions - offset
    return float(np.abs(u - np.round(u)).min())


def choose_offset(points: np.ndarray, N: int) -> Tuple[float, float, bool]:
    """Deterministic node offset keeping every node ``pi/(4N)`` away from ``points``.

    Returns ``(offset, clearance in radians, fallback used)``.  The golden
    ratio sequence from ``0.381966...`` is tried first; if none of its
    ``OFFSET_RETRIES`` members in ``[0.1, 0.9)`` clears the points, the
    midpoint of the largest gap between them is used.
    """
    positions = _node_positions(points, N)
    to_radians = 2.0 * np.pi / N
    for k in range(OFFSET_RETRIES):
        offset = (GOLDEN_START + k * GOLDEN_STEP) % 1.0
        if not (OFFSET_WINDOW[0] <= offset < OFFSET_WINDOW[1]):
            continue
        cell = _cell_clearance(positions, offset)
        if cell >= 0.125:
            return offset, cell * to_radians, False

    ordered = np.sort(positions)
    gaps = np.diff(np.concatenate([ordered, [ordered[0] + 1.0]]))
    widest = int(np.argmax(gaps))
    offset = float((ordered[widest] + 0.5 * gaps[widest]) % 1.0)
    clearance = _cell_clearance(positions, offset) * to_radians
    if clearance < 1e-9:
        raise OffsetSearchError(f"no node offset clears the {points.size} exceptional points at N={N}")
    log.warning(
        f"[dilate] no golden-ratio offset clears the exceptional points by pi/(4N); "
        f"using widest-gap offset {offset:.6f} (clearance {clearance:.3e} rad)"
    )
    return offset, clearance, True


def build_dilation(sym: SymbolFamily, N: int) -> DilationModel:
    N = _validate_node_count(N)
    offset, clearance, fallback = choose_offset(sym.exceptional_points(), N)
    nodes = np.exp(2j * np.pi * (np.arange(N) + offset) / N)
    blocks = np.stack([sym.evaluate_many(j, nodes) for j in range(sym.d)])
    log.info(f"[dilate] N={N} offset={offset:.6f} d={sym.d} dim={sym.dim}")
    return DilationModel(
        r=sym.r,
        N=N,
        offset=offset,
        nodes=nodes,
        blocks=blocks,
        targets=sym.targets,
        clearance=clearance,
        node_targets=(sym.r ** 2, 1.0),
        offset_fallback=fallback,
        snap=sym.snap,
        symbols=sym,
    )


# ---------------------------------------------------------------------------
# Verification


@dataclass(frozen=True)
class NodeClassReport:
    spectrum_residual: float
    defect_residual: float
    min_singular_value: float
    worst_entry: int
    worst_node: int

    @property
    def residual(self) -> float:
        return self.spectrum_residual

    def to_dict(self) -> Dict[str, object]:
        return {
            'spectrum_residual': self.spectrum_residual,
            'defect_residual': self.defect_residual,
            'min_singular_value': self.min_singular_value,
            'worst_entry': self.worst_entry,
            'worst_node': self.worst_node,
        }


def verify_node_class(model: DilationModel, r: Optional[float] = None) -> NodeClassReport:
    """Worst deviation of the node blocks from the exact class.

    Measures both the distance of the eigenvalues of ``F* F`` from
    ``model.node_targets`` (relative to the targets) and the norm of the
    exact-class defect.
    """
    r = model.r if r is None else float(r)
    low, high = model.node_targets
    B = model.blocks
    gram = _batched_adjoint(B) @ B
    eigenvalues = np.linalg.eigvalsh(gram)
    distance = np.minimum(np.abs(eigenvalues / low - 1.0), np.abs(eigenvalues / high - 1.0)).max(axis=-1)

    inv = np.linalg.inv(B)
    inv_gram = inv @ _batched_adjoint(inv)
    eye = identity(model.dim)
    if model.qa:
        defect = (r ** -2 + r ** 2) * eye - gram - inv_gram
    else:
        defect = (1.0 + r ** 2) * eye - gram - r ** 2 * inv_gram
    defect_norms = _batched_norm(defect)
    smin = np.linalg.svd(B, compute_uv=False)[..., -1]

    j, k = np.unravel_index(int(np.argmax(distance)), distance.shape)
    report = NodeClassReport(
        spectrum_residual=float(distance.max()),
        defect_residual=float(defect_norms.max()),
        min_singular_value=float(smin.min()),
        worst_entry=int(j),
        worst_node=int(k),
    )
    log.debug(f"[verify] node class residual {report.spectrum_residual:.3e}, defect {report.defect_residual:.3e}")
    return report


def verify_node_commutation(model: DilationModel) -> float:
    """Worst double commutation residual of the node blocks across entries."""
    return _pairwise_block_commutation(list(model.blocks))


def _entry_powers(blocks: np.ndarray, max_power: int) -> Dict[int, np.ndarray]:
    powers = {0: np.broadcast_to(identity(blocks.shape[-1]), blocks.shape)}
    inv = np.linalg.inv(blocks)
    for n in range(1, max_power + 1):
        powers[n] = powers[n - 1] @ blocks
        powers[-n] = powers[-n + 1] @ inv
    return powers


def verify_moments(
    model: DilationModel,
    tup: Optional[OperatorTuple] = None,
    max_power: int = 3,
) -> pd.Series:
    """``||T^n - (1/N) sum_k F_1^{n_1}(zeta_k) ... F_d^{n_d}(zeta_k)||`` for ``n`` in ``[-P, P]^d``.

    The comparison is against ``tup`` when given, otherwise against the
    tuple the model was built for (the snap, if snapping happened).
    """
    max_power = int(max_power)
    if max_power < 0 or max_power > MAX_POWER:
        raise PowerOverflowError(f"moment powers are limited to |n| <= {MAX_POWER}, got {max_power}")
    targets = tuple(tup.ops) if tup is not None else model.targets
    if len(targets) != model.d:
        raise ValueError(f"tuple has {len(targets)} entries, model has {model.d}")

    guard = model.r ** -MAX_POWER * (1.0 + 1e-6)
    footprint = model.blocks.nbytes * (2 * max_power + 1)
    cached = footprint <= POWER_CACHE_BYTES
    powers = [_entry_powers(model.blocks[j], max_power) for j in range(model.d)] if cached else None

    def node_power(j: int, n: int) -> np.ndarray:
        if powers is not None:
            return powers[j][n]
        return np.linalg.matrix_power(model.blocks[j], n)

    for j in range(model.d):
        for n in (-max_power, max_power):
            peak = float(_batched_norm(node_power(j, n)).max(initial=0.0))
            if peak > guard:
                raise PowerOverflowError(f"entry {j}: ||F^{n}|| = {peak:.3e} exceeds r^-{MAX_POWER}")

    target_powers = [
        {n: np.linalg.matrix_power(T, n) for n in range(-max_power, max_power + 1)} for T in targets
    ]
    index = list(itertools.product(range(-max_power, max_power + 1), repeat=model.d))
    errors = []
    for multi in index:
        product = node_power(0, multi[0])
        expected = target_powers[0][multi[0]]
        for j in range(1, model.d):
            product = product @ node_power(j, multi[j])
            expected = expected @ target_powers[j][multi[j]]
        errors.append(operator_norm(expected - product.mean(axis=0)))

    names = [f"n{j + 1}" for j in range(model.d)]
    table = pd.Series(errors, index=pd.MultiIndex.from_tuples(index, names=names), name='error')
    log.info(f"[moments] N={model.N} max_power={max_power} worst error {table.max():.3e}")
    return table


def moment_ratio(coarse: pd.Series, fine: pd.Series) -> Tuple[Optional[float], tuple]:
    """Fine-to-coarse error ratio at the worst coarse multi-index.

    The ratio is ``None`` when the coarse error there is exactly zero.
    """
    worst = coarse.idxmax()
    ratio = float(fine[worst] / coarse[worst]) if coarse[worst] > 0 else None
    return ratio, worst


def convergence_ratio(
    sym: SymbolFamily,
    N: int,
    tup: Optional[OperatorTuple] = None,
    max_power: int = 3,
) -> Tuple[Optional[float], pd.Series, pd.Series]:
    """Error ratio between ``2N`` and ``N`` nodes at the worst multi-index for ``N``."""
    coarse = verify_moments(build_dilation(sym, N), tup, max_power)
    fine = verify_moments(build_dilation(sym, 2 * N), tup, max_power)
    ratio, worst = moment_ratio(coarse, fine)
    log.info(f"[moments] convergence ratio N={N} -> {2 * N}: {ratio} at n={worst}")
    return ratio, coarse, fine


# ---------------------------------------------------------------------------
# Entry points


def dilate_c1r(
    tup: OperatorTuple,
    N: Optional[int] = None,
    snap_level: Optional[int] = None,
    tol: Optional[ToleranceConfig] = None,
) -> DilationModel:
    """Build symbols and the ``N``-node model; snap at ``snap_level`` only if needed."""
    N = int(configured_default('nodes', 8192) if N is None else N)
    if snap_level is None:
        snap_level = int(configured_default('snap_level', 20))
    sym = build_symbols(tup, snap_level=snap_level, tol=tol)
    return build_dilation(sym, N)


def dilate_qar(
    tup: OperatorTuple,
    N: Optional[int] = None,
    snap_level: Optional[int] = None,
    tol: Optional[ToleranceConfig] = None,
) -> DilationModel:
    """Dilate a ``QA_r`` tuple through the ``C_{1,r^2}`` model of ``rT``.

    The returned blocks are ``1/r`` times the ``C_{1,r^2}`` blocks, so every
    node block is an exact ``QA_r`` operator with moduli ``r`` and ``1/r``.
    """
    tol = resolve_tolerances(tol)
    r = tup.r
    for j, T in enumerate(tup.ops):
        cert = certificate_for(T, r, ClassTag.QAR, tol)
        if not cert.member:
            raise MembershipError(f"entry {j} is not a QAr member", cert)
    scaled_ops = []
    for T in tup.ops:
        S, r2 = qa_to_c1r(T, r)
        scaled_ops.append(S)
    scaled = OperatorTuple(r=r2, ops=tuple(scaled_ops))
    inner = dilate_c1r(scaled, N, snap_level, tol)
    return replace(
        inner,
        r=r,
        blocks=inner.blocks / r,
        targets=tuple(T / r for T in inner.targets),
        node_targets=(r ** 2, r ** -2),
        scale=1.0 / r,
        qa=True,
    )
