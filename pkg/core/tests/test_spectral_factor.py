import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.exceptions import ClusteringAmbiguityError, NotDoublyCommutingError, SpectrumBoundaryError
from core.instances import gen_normal_tuple, gen_random_c1r
from core.matrix_core import adjoint, identity, operator_norm
from core.operator_classes import OperatorTuple
from core.spectral_factor import (
    compose_ud,
    joint_spectral_resolution,
    snap_spectrum,
    snap_to_grid,
    ud_factorize,
)


def test_unitary_tuple_has_identity_positive_parts():
    U1 = np.diag(np.exp(1j * np.array([0.3, 1.1, -2.0])))
    U2 = np.diag(np.exp(1j * np.array([2.5, -0.4, 0.9])))
    fact = ud_factorize(OperatorTuple.of(0.5, U1, U2))
    for D in fact.positives:
        assert_allclose(D, identity(3), atol=1e-12)
    assert_allclose(fact.unitaries[0], U1, atol=1e-12)
    assert not fact.degraded


def test_positive_diagonal_tensor_pair():
    r = 0.5
    T1 = np.kron(np.diag([1.0, r]), np.eye(2))
    T2 = np.kron(np.eye(2), np.diag([r, 1.0]))
    fact = ud_factorize(OperatorTuple.of(r, T1, T2))
    assert_allclose(fact.positives[0], T1, atol=1e-12)
    assert_allclose(fact.positives[1], T2, atol=1e-12)
    for U in fact.unitaries:
        assert_allclose(U, identity(4), atol=1e-12)


@pytest.mark.parametrize('seed', range(5))
def test_normal_tuple_relations(seed):
    r = 0.5
    fact = ud_factorize(gen_normal_tuple(seed, 3, 4, r))
    assert fact.max_residual() <= 1e-10
    for low, high in fact.spectral_ranges:
        assert r - 1e-9 <= low and high <= 1.0 + 1e-9


def test_tensor_pair_relations(tensor_pair):
    fact = ud_factorize(tensor_pair)
    assert fact.max_residual() <= 1e-10
    assert not fact.degraded


def test_not_doubly_commuting_is_rejected():
    A = gen_random_c1r(2, 3, 0.5)
    with pytest.raises(NotDoublyCommutingError):
        ud_factorize(OperatorTuple.of(0.5, A, A @ A))


def test_non_member_is_degraded():
    fact = ud_factorize(OperatorTuple.of(0.5, np.diag([0.5, 2.0])))
    assert fact.degraded
    assert fact.spectral_ranges[0] == pytest.approx((0.5, 2.0))


def test_quantum_annulus_factorization():
    r = 0.5
    fact = ud_factorize(OperatorTuple.of(r, np.diag([r, 1.0 / r])), qa=True)
    assert not fact.degraded
    low, high = fact.spectral_ranges[0]
    assert r - 1e-12 <= low and high <= 1.0 / r + 1e-12


def test_self_adjoint_entry_gives_sign_unitary():
    T = np.diag([0.7, -0.8, 0.9])
    fact = ud_factorize(OperatorTuple.of(0.5, T))
    assert_allclose(fact.unitaries[0], np.diag([1.0, -1.0, 1.0]), atol=1e-12)


def test_compose_ud_rebuilds_tuple():
    tup = gen_normal_tuple(8, 2, 3, 0.5)
    fact = ud_factorize(tup)
    rebuilt = compose_ud(fact.unitaries, fact.positives, 0.5)
    for A, B in zip(rebuilt.ops, tup.ops):
        assert_allclose(A, B, atol=1e-10)


def test_compose_ud_rejects_non_commuting_parts():
    U = np.array([[0.0, 1.0], [1.0, 0.0]])
    D = np.diag([0.6, 0.9])
    with pytest.raises(NotDoublyCommutingError):
        compose_ud([U, np.eye(2)], [np.eye(2), D], 0.5)


def test_resolution_of_repeated_eigenvalue():
    fact = ud_factorize(OperatorTuple.of(0.5, np.diag([0.6, 0.6, 0.9])))
    res = joint_spectral_resolution(fact, 0.5)
    entry = res.entries[0]
    assert entry.m == 2
    assert_allclose(entry.eigenvalues, [0.6, 0.9], atol=1e-14)
    assert [round(np.trace(P).real) for P in entry.projections] == [2, 1]
    assert max(res.residuals.values()) <= 1e-10


def test_joint_resolution_of_diagonal_pair():
    D1 = np.diag([0.6, 0.6, 0.8, 0.8])
    D2 = np.diag([0.7, 0.9, 0.7, 0.9])
    res = joint_spectral_resolution(ud_factorize(OperatorTuple.of(0.5, D1, D2)), 0.5)
    assert [e.m for e in res.entries] == [2, 2]
    assert len(res.joint_bases) == 4
    assert all(B.shape[1] == 1 for B in res.joint_bases)
    assert_allclose(res.joint_points, [[0.6, 0.7], [0.6, 0.9], [0.8, 0.7], [0.8, 0.9]], atol=1e-14)


@pytest.mark.parametrize('seed', range(4))
def test_random_joint_resolution_residuals(seed):
    tup = gen_normal_tuple(seed, 2, 5, 0.5)
    fact = ud_factorize(tup)
    res = joint_spectral_resolution(fact, 0.5)
    for entry in res.entries:
        assert operator_norm(sum(entry.projections) - identity(5)) <= 1e-10
    assert res.residuals['orthogonality'] <= 1e-10
    assert res.residuals['cross_commutation'] <= 1e-10
    assert res.residuals['unitary_commutation'] <= 1e-10
    assert res.residuals['reconstruction'] <= 1e-10


def test_near_clusters_are_refused():
    fact = ud_factorize(OperatorTuple.of(0.5, np.diag([0.6, 0.6 + 5e-8])))
    with pytest.raises(ClusteringAmbiguityError) as excinfo:
        joint_spectral_resolution(fact, 0.5, gap=1e-8)
    assert excinfo.value.exit_code == 5


def test_snap_worked_example():
    r = 0.5
    fact = ud_factorize(OperatorTuple.of(r, np.diag([0.5, 1.0])))
    approx = snap_spectrum(fact, r, 3)
    assert_allclose(approx.snapped[0], np.diag([0.53125, 0.96875]), atol=1e-14)
    assert approx.forward_errors[0] == pytest.approx(0.03125, abs=1e-14)
    assert approx.inverse_errors[0] == pytest.approx(0.03125 / (0.53125 * 0.5), abs=1e-12)
    assert approx.bound == 0.125 and approx.inverse_bound == 0.5
    assert approx.within_bounds


def test_grid_midpoint_is_fixed():
    assert snap_to_grid(np.array([0.53125]), 0.5, 3)[0] == 0.53125


def test_snap_rejects_spectrum_outside_interval():
    fact = ud_factorize(OperatorTuple.of(0.5, np.diag([0.5, 2.0])))
    with pytest.raises(SpectrumBoundaryError):
        snap_spectrum(fact, 0.5, 4)


@pytest.mark.parametrize('m', [3, 6, 10, 20])
@pytest.mark.parametrize('seed', range(6))
def test_snap_bounds_hold(seed, m):
    r = 0.4 + 0.1 * (seed % 4)
    tup = gen_normal_tuple(seed, 1 + seed % 3, 2 + seed % 5, r)
    approx = snap_spectrum(ud_factorize(tup), r, m)
    assert max(approx.forward_errors) <= 2.0 ** -m
    assert max(approx.inverse_errors) <= r ** -2 * 2.0 ** -m
    for D in approx.snapped:
        eigenvalues = np.linalg.eigvalsh(D)
        assert eigenvalues.min() > r and eigenvalues.max() < 1.0


@pytest.mark.parametrize('seed', range(4))
def test_snap_errors_shrink_with_level(seed):
    r = 0.4 + 0.1 * seed
    fact = ud_factorize(gen_normal_tuple(seed, 2, 3, r))
    errors = [max(snap_spectrum(fact, r, m).forward_errors) for m in range(2, 21)]
    for m, (coarse, fine) in zip(range(2, 21), zip(errors, errors[1:])):
        # half a level-m cell bounds the error, so a finer grid can only add a quarter cell
        assert coarse <= (1.0 - r) * 2.0 ** -(m + 1) + 1e-12
        assert fine <= coarse + (1.0 - r) * 2.0 ** -(m + 2) + 1e-12
    assert errors[-1] <= min(errors[:-1]) + (1.0 - r) * 2.0 ** -21 + 1e-12


def test_snapped_tuple_stays_doubly_commuting():
    tup = gen_normal_tuple(12, 3, 4, 0.5)
    approx = snap_spectrum(ud_factorize(tup), 0.5, 5)
    assert approx.factorization.max_residual() <= 1e-10
    U = approx.factorization.unitaries
    for k in range(3):
        for j in range(3):
            if j != k:
                assert operator_norm(U[k] @ approx.snapped[j] - approx.snapped[j] @ U[k]) <= 1e-10


def test_snapping_merges_cells():
    r = 0.5
    fact = ud_factorize(OperatorTuple.of(r, np.diag([0.6, 0.61, 0.9])))
    approx = snap_spectrum(fact, r, 1)
    # cells [0.5, 0.75) and [0.75, 1]: 0.6 and 0.61 share a midpoint
    entry = approx.resolution.entries[0]
    assert entry.m == 2
    assert_allclose(entry.eigenvalues, [0.625, 0.875])
    assert [round(np.trace(P).real) for P in entry.projections] == [2, 1]
    assert_allclose(approx.snapped[0], np.diag([0.625, 0.625, 0.875]), atol=1e-14)
    assert_allclose(approx.snapped[0], adjoint(approx.snapped[0]))
