import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import subspace_angles

from core.decomposition import (
    CNU,
    EXACT,
    canonical_decompose,
    cross_reduction_check,
    maximal_exact_subspace,
    tuple_decompose,
    word_defect,
    word_oracle_subspace,
)
from core.exceptions import MembershipError, NotDoublyCommutingError, WordLengthError
from core.instances import gen_mixed_c1r, gen_random_c1r, gen_tensor_tuple
from core.matrix_core import adjoint, identity, operator_norm
from core.operator_classes import OperatorTuple, defect_c1r


def haar(rng, dim):
    Q, R = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


# ---------------------------------------------------------------------------
# Word defects


def test_empty_word_is_the_defect():
    T = gen_random_c1r(2, 3, 0.5)
    assert_allclose(word_defect(T, 0.5, (), ()).matrix, defect_c1r(T, 0.5), atol=1e-13)
    assert word_defect(T, 0.5, (), ()).k == 0


def test_diagonal_word_defects():
    T = np.diag([0.5, 0.8])
    assert_allclose(np.diag(word_defect(T, 0.5, (0,), (0,)).matrix).real, [0.0, 0.219375], atol=1e-14)
    # p = T: p* Delta p scales the defect by |t|^2
    assert_allclose(np.diag(word_defect(T, 0.5, (1,), (0,)).matrix).real, [0.0, 0.1404], atol=1e-14)


@pytest.mark.parametrize('n, m', [((1,), (1,)), ((2, 0), (1, 1)), ((1, 1, 1), (0, 2, 0))])
def test_exact_operator_has_vanishing_word_defects(n, m):
    T = gen_mixed_c1r(4, 3, 3, 0.5)
    assert operator_norm(word_defect(T, 0.5, n, m).matrix) <= 1e-11


def test_word_length_guard():
    with pytest.raises(WordLengthError):
        word_defect(np.eye(2), 0.5, (1,) * 7, (0,) * 7)
    with pytest.raises(WordLengthError):
        word_defect(np.eye(2), 0.5, (1, 2), (0,))


# ---------------------------------------------------------------------------
# Canonical decomposition


def test_diagonal_canonical_decomposition():
    r = 0.5
    result = canonical_decompose(np.diag([r, 1.0, 0.8]), r)
    exact, cnu = result.block(EXACT), result.block(CNU)
    assert (exact.dim, cnu.dim) == (2, 1)
    assert_allclose(exact.projector(), np.diag([1.0, 1.0, 0.0]), atol=1e-12)
    assert exact.certificates['passes'] and cnu.certificates['passes']
    assert not result.ambiguous
    assert max(result.residuals.values()) <= 1e-10


def test_exact_operator_has_no_cnu_part():
    result = canonical_decompose(np.diag([0.5, 1.0]), 0.5)
    assert result.block(EXACT).dim == 2
    assert result.block(CNU).dim == 0


def test_scalar_interior_operator_is_cnu():
    result = canonical_decompose(0.8 * np.eye(2), 0.5)
    assert result.block(CNU).dim == 2


@pytest.mark.parametrize('dim, exact_dim, seed', [(3, 1, 0), (4, 2, 1), (5, 2, 2), (5, 3, 3), (4, 1, 4)])
def test_fixed_point_matches_word_oracle(dim, exact_dim, seed, tol):
    r = 0.5
    T = gen_mixed_c1r(seed, dim, exact_dim, r)
    fixed = maximal_exact_subspace(T, r, tol.kernel_tol)
    oracle = word_oracle_subspace(T, r, dim, tol)
    assert fixed.shape[1] == oracle.shape[1] == exact_dim
    assert np.max(subspace_angles(fixed, oracle)) <= 1e-8
    assert canonical_decompose(T, r).block(EXACT).dim == exact_dim


def test_decomposition_is_unitarily_covariant(rng):
    r = 0.5
    T = np.diag([r, 1.0, 0.8]).astype(complex)
    Q = haar(rng, 3)
    P = canonical_decompose(Q @ T @ adjoint(Q), r).block(EXACT).projector()
    assert_allclose(P, Q @ np.diag([1.0, 1.0, 0.0]) @ adjoint(Q), atol=1e-10)


def test_quantum_annulus_decomposition():
    r = 0.5
    result = canonical_decompose(np.diag([r, 1.0 / r, 1.0]), r, qa=True)
    assert_allclose(result.block(EXACT).projector(), np.diag([1.0, 1.0, 0.0]), atol=1e-12)


def test_non_member_is_rejected():
    with pytest.raises(MembershipError):
        canonical_decompose(np.diag([1.5, 0.8]), 0.5)


def test_unstable_kernel_is_ambiguous():
    result = canonical_decompose(np.diag([1.0 - 1e-8, 0.8]), 0.5)
    assert result.ambiguous
    assert result.to_dict(include_basis=False)['ambiguous'] is True


# ---------------------------------------------------------------------------
# Tuples


def test_diagonal_pair_has_four_blocks():
    r = 0.5
    tup = OperatorTuple.of(r, np.diag([r, r, 0.8, 0.8]), np.diag([1.0, 0.8, 1.0, 0.8]))
    result = tuple_decompose(tup)
    assert [b.omega for b in result.blocks] == [
        (EXACT, EXACT), (EXACT, CNU), (CNU, EXACT), (CNU, CNU),
    ]
    for k, block in enumerate(result.blocks):
        assert block.dim == 1
        assert_allclose(block.projector(), np.diag(np.eye(4)[k]), atol=1e-12)
    assert result.block(EXACT, CNU).label == 't1,t2'


def test_all_exact_pair_keeps_empty_blocks():
    r = 0.5
    result = tuple_decompose(OperatorTuple.of(r, np.diag([r, 1.0]), np.diag([1.0, r])))
    assert len(result.blocks) == 4
    assert result.block(EXACT, EXACT).dim == 2
    assert sum(b.dim for b in result.blocks) == 2
    assert result.residuals['sum_to_identity'] <= 1e-12


def test_tensor_product_block_dimensions():
    r = 0.5
    tup = gen_tensor_tuple([np.diag([r, 0.8]), gen_mixed_c1r(5, 3, 1, r)], r)
    dims = {b.omega: b.dim for b in tuple_decompose(tup).blocks}
    assert dims == {(EXACT, EXACT): 1, (EXACT, CNU): 2, (CNU, EXACT): 1, (CNU, CNU): 2}


def test_split_order_does_not_matter():
    r = 0.5
    tup = gen_tensor_tuple([np.diag([r, 0.8]), gen_mixed_c1r(6, 3, 1, r)], r)
    forward = tuple_decompose(tup)
    backward = tuple_decompose(tup, order=[1, 0])
    for a, b in zip(forward.blocks, backward.blocks):
        assert a.omega == b.omega
        assert_allclose(a.projector(), b.projector(), atol=1e-9)


def test_bad_order_is_rejected():
    tup = OperatorTuple.of(0.5, np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        tuple_decompose(tup, order=[0, 0])


def test_tuple_decomposition_requires_double_commutation():
    A = gen_random_c1r(1, 3, 0.5)
    with pytest.raises(NotDoublyCommutingError):
        tuple_decompose(OperatorTuple.of(0.5, A, A @ A))


# ---------------------------------------------------------------------------
# Cross reduction


def test_identity_partner_is_reduced():
    A = gen_mixed_c1r(7, 4, 2, 0.5)
    report = cross_reduction_check(A, identity(4), 0.5)
    assert report
    assert report.reduction_residual <= 1e-12


def test_tensor_partner_is_reduced():
    r = 0.5
    tup = gen_tensor_tuple([gen_mixed_c1r(8, 3, 1, r), np.diag([r, 0.8])], r)
    report = cross_reduction_check(*tup.ops, r)
    assert report.holds
    assert report.commutator_residual <= 1e-9


def test_commuting_powers_are_refused():
    A = gen_random_c1r(9, 3, 0.5)
    with pytest.raises(NotDoublyCommutingError):
        cross_reduction_check(A, A @ A, 0.5)
