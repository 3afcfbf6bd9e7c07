import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.decomposition import EXACT, canonical_decompose
from core.exceptions import MembershipError
from core.instances import (
    SarasonShiftSpec,
    gen_mixed_c1r,
    gen_normal_tuple,
    gen_random_c1r,
    gen_random_qar,
    gen_sarason,
    gen_scalar_family,
    gen_tensor_tuple,
    scalar_family_defect,
)
from core.operator_classes import ClassTag, defect_c1r, is_doubly_commuting, is_member


@pytest.mark.parametrize('n', [1, 2, 3, 5])
def test_scalar_family_values_and_defects(n):
    r = 0.25
    T = gen_scalar_family(n, r, dim=2)
    assert_allclose(T, r ** (1.0 / (2 * n)) * np.eye(2), atol=1e-15)
    assert_allclose(defect_c1r(T, r), scalar_family_defect(n, r) * np.eye(2), atol=1e-14)
    assert scalar_family_defect(n, r) > 0
    assert is_member(T, r, ClassTag.C1R)


def test_scalar_family_rejects_index_zero():
    with pytest.raises(ValueError):
        gen_scalar_family(0, 0.5)


@pytest.mark.parametrize('alpha', [0.0, 0.3, 0.7])
@pytest.mark.parametrize('r', [0.2, 0.5, 0.9])
def test_sarason_defect_identity(alpha, r):
    spec = SarasonShiftSpec(alpha=alpha, r=r, half_width=6)
    for n in range(-6, 6):
        assert abs(spec.scalar_defect(n) - spec.defect_identity(n)) <= 1e-12
        assert spec.scalar_defect(n) >= 0


def test_sarason_matrix_layout(sarason_spec):
    S = gen_sarason(sarason_spec)
    assert S.shape == (17, 17)
    assert_allclose(np.diag(S, k=-1), sarason_spec.weights(), atol=1e-15)
    assert S[0, 16] == pytest.approx(np.sqrt(0.5))
    assert is_member(S, 0.5, ClassTag.C1R)


def test_sarason_spec_validation():
    with pytest.raises(ValueError):
        SarasonShiftSpec(alpha=1.0, r=0.5, half_width=3)
    with pytest.raises(ValueError):
        SarasonShiftSpec(alpha=0.2, r=0.5, half_width=0)


def test_normal_tuple_is_deterministic():
    first, second = gen_normal_tuple(3, 2, 4, 0.5), gen_normal_tuple(3, 2, 4, 0.5)
    for A, B in zip(first.ops, second.ops):
        assert np.array_equal(A, B)
    assert is_doubly_commuting(first)[0]
    for T in first.ops:
        assert is_member(T, 0.5, ClassTag.C1R)


def test_tensor_tuple_dimensions():
    tup = gen_tensor_tuple([gen_random_c1r(1, 2, 0.5), gen_random_c1r(2, 3, 0.5)], 0.5)
    assert tup.d == 2 and tup.dim == 6
    ok, residual = is_doubly_commuting(tup)
    assert ok and residual <= 1e-13


def test_tensor_tuple_rejects_non_members():
    with pytest.raises(MembershipError):
        gen_tensor_tuple([np.diag([2.0, 0.7]), np.eye(2)], 0.5)


def test_random_members():
    assert is_member(gen_random_c1r(0, 5, 0.3), 0.3, ClassTag.C1R)
    S = gen_random_qar(0, 5, 0.6)
    assert is_member(S, 0.6, ClassTag.QAR)


@pytest.mark.parametrize('dim, exact_dim', [(3, 0), (3, 3), (4, 2)])
def test_mixed_generator_exact_dimension(dim, exact_dim):
    T = gen_mixed_c1r(11, dim, exact_dim, 0.5)
    assert is_member(T, 0.5, ClassTag.C1R)
    assert canonical_decompose(T, 0.5).block(EXACT).dim == exact_dim


def test_scalar_family_worked_numbers():
    assert gen_scalar_family(1, 0.25)[0, 0] == pytest.approx(0.5)
    assert scalar_family_defect(1, 0.25) == pytest.approx(0.5625)
    assert gen_scalar_family(2, 0.25)[0, 0] == pytest.approx(0.25 ** 0.25)
