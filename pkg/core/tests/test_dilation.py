from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from core.dilation import (
    build_dilation,
    build_symbols,
    choose_offset,
    convergence_ratio,
    dilate_c1r,
    dilate_qar,
    moment_ratio,
    verify_moments,
    verify_node_class,
    verify_node_commutation,
)
from core.exceptions import (
    InvalidNodeCountError,
    MembershipError,
    NotDoublyCommutingError,
    PowerOverflowError,
    SpectrumBoundaryError,
)
from core.instances import SarasonShiftSpec, gen_normal_tuple, gen_random_c1r, gen_random_qar, gen_sarason
from core.matrix_core import adjoint, identity
from core.operator_classes import OperatorTuple


@pytest.fixture
def scalar_tuple():
    return OperatorTuple.of(0.5, np.array([[0.8]]))


def test_scalar_symbol_reproduces_operator_at_origin(scalar_tuple):
    sym = build_symbols(scalar_tuple)
    assert sym.d == 1 and sym.dim == 1
    assert abs(sym.evaluate(0, 0.0)[0, 0] - 0.8) <= 1e-10
    assert sym.origin_residual <= 1e-10
    assert sym.snap is None


def test_multiple_of_identity_has_one_projection():
    sym = build_symbols(OperatorTuple.of(0.5, 0.7 * np.eye(3)))
    assert len(sym.projections[0]) == 1
    assert_allclose(sym.projections[0][0], identity(3), atol=1e-12)


def test_symbols_of_tensor_pair_doubly_commute(tensor_pair, rng):
    sym = build_symbols(tensor_pair)
    z = 0.9 * np.sqrt(rng.uniform(size=50)) * np.exp(2j * np.pi * rng.uniform(size=50))
    assert sym.commutation_residual(z) <= 1e-10
    for j in range(2):
        assert_allclose(sym.evaluate(j, 0.0), tensor_pair.ops[j], atol=1e-10)


def test_boundary_spectrum_requires_snapping():
    unitary = OperatorTuple.of(0.5, np.diag(np.exp(1j * np.array([0.2, 2.0]))))
    with pytest.raises(SpectrumBoundaryError):
        build_symbols(unitary)
    sym = build_symbols(unitary, snap_level=20)
    assert sym.snap_level == 20
    assert max(sym.snap.forward_errors) <= 2.0 ** -20


def test_symbols_reject_non_members():
    with pytest.raises(MembershipError):
        build_symbols(OperatorTuple.of(0.5, np.diag([0.9, 1.5])))


def test_symbols_reject_non_doubly_commuting():
    A = gen_random_c1r(1, 2, 0.5)
    with pytest.raises(NotDoublyCommutingError):
        build_symbols(OperatorTuple.of(0.5, A, A @ A))


def test_isometry_and_node_invertibility(scalar_tuple):
    model = build_dilation(build_symbols(scalar_tuple), 16)
    V = model.isometry()
    assert V.shape == (16, 1)
    assert_allclose(adjoint(V) @ V, identity(1), atol=1e-13)
    report = verify_node_class(model)
    assert report.min_singular_value >= 0.5 - 1e-8


def test_compression_of_multiplication_operator_is_node_average(tensor_pair):
    model = build_dilation(build_symbols(tensor_pair), 16)
    V = model.isometry()
    for j in range(2):
        M = model.multiplication_operator(j)
        assert M.shape == (16 * 4, 16 * 4)
        assert_allclose(adjoint(V) @ M @ V, model.blocks[j].mean(axis=0), atol=1e-13)


def test_offset_is_deterministic(scalar_tuple):
    sym = build_symbols(scalar_tuple)
    first, second = build_dilation(sym, 64), build_dilation(sym, 64)
    assert first.offset == second.offset
    assert 0.1 <= first.offset < 0.9
    assert first.clearance >= np.pi / (4 * 64)
    assert not first.offset_fallback


def test_offset_fallback_for_crowded_points():
    points = np.exp(2j * np.pi * (np.arange(40) + 0.5) / 40 / 16)
    offset, clearance, fallback = choose_offset(points, 16)
    assert fallback
    assert clearance > 1e-9


@pytest.mark.parametrize('N', [8, 24, 100])
def test_node_count_validation(scalar_tuple, N):
    with pytest.raises(InvalidNodeCountError):
        build_dilation(build_symbols(scalar_tuple), N)


def test_scalar_node_class_is_exact(scalar_tuple):
    model = build_dilation(build_symbols(scalar_tuple), 256)
    report = verify_node_class(model)
    assert report.residual <= 1e-10
    assert report.defect_residual <= 1e-9
    moduli = np.abs(model.blocks[0, :, 0, 0]) ** 2
    assert np.all(np.minimum(np.abs(moduli - 0.25), np.abs(moduli - 1.0)) <= 1e-10)


def test_unitary_input_is_snapped_into_exact_nodes():
    unitary = OperatorTuple.of(0.5, np.diag(np.exp(1j * np.array([0.2, 2.0]))))
    model = dilate_c1r(unitary, 256, snap_level=20)
    assert model.snap_level == 20
    assert verify_node_class(model).defect_residual <= 1e-9


@pytest.mark.parametrize(
    'make',
    [
        lambda: OperatorTuple.of(0.5, np.array([[0.8]])),
        lambda: OperatorTuple.of(0.5, gen_sarason(SarasonShiftSpec(alpha=0.3, r=0.5, half_width=8))),
        lambda: gen_normal_tuple(7, 3, 3, 0.8),
    ],
    ids=['scalar', 'sarason', 'normal'],
)
def test_node_class_and_commutation_over_seed_set(make):
    model = dilate_c1r(make(), 1024)
    assert verify_node_class(model).defect_residual <= 1e-9
    assert verify_node_commutation(model) <= 1e-10


def test_tensor_pair_node_checks(tensor_pair, sarason_tensor_pair):
    for tup in (tensor_pair, sarason_tensor_pair):
        model = dilate_c1r(tup, 1024)
        assert verify_node_class(model).defect_residual <= 1e-9
        assert verify_node_commutation(model) <= 1e-10


def test_zero_power_moment_is_exact(scalar_tuple):
    table = verify_moments(build_dilation(build_symbols(scalar_tuple), 64), max_power=0)
    assert len(table) == 1
    assert table.iloc[0] == 0.0


def test_moment_table_shape(tensor_pair):
    model = build_dilation(build_symbols(tensor_pair), 256)
    table = verify_moments(model, max_power=2)
    assert len(table) == 25
    assert list(table.index.names) == ['n1', 'n2']
    assert table.loc[(0, 0)] == 0.0


def test_moments_of_inverse_tuple_mirror_negative_powers():
    tup = gen_normal_tuple(5, 2, 2, 0.8)
    model = build_dilation(build_symbols(tup), 256)
    table = verify_moments(model, max_power=2)
    inverse_model = replace(
        model,
        blocks=np.linalg.inv(model.blocks),
        targets=tuple(np.linalg.inv(T) for T in model.targets),
    )
    mirrored = verify_moments(inverse_model, max_power=2)
    for n in table.index:
        assert abs(mirrored.loc[n] - table.loc[tuple(-k for k in n)]) <= 1e-12


def test_zero_error_ratio_is_none(scalar_tuple):
    ratio, coarse, fine = convergence_ratio(build_symbols(scalar_tuple), 64, max_power=0)
    assert ratio is None
    assert coarse.max() == 0.0 and fine.max() == 0.0


def test_moment_ratio_at_worst_index():
    index = pd.MultiIndex.from_tuples([(0,), (1,), (2,)], names=['n1'])
    coarse = pd.Series([0.0, 4e-3, 1e-3], index=index)
    fine = pd.Series([0.0, 2e-3, 8e-4], index=index)
    ratio, worst = moment_ratio(coarse, fine)
    assert worst == (1,)
    assert ratio == pytest.approx(0.5)


def test_power_guard(scalar_tuple):
    model = build_dilation(build_symbols(scalar_tuple), 16)
    with pytest.raises(PowerOverflowError):
        verify_moments(model, max_power=13)


def test_qa_diagonal_node_moduli():
    r = 0.5
    model = dilate_qar(OperatorTuple.of(r, np.diag([r, 1.0 / r])), 256)
    assert model.qa and model.scale == 2.0
    report = verify_node_class(model)
    assert report.residual <= 1e-9
    assert report.defect_residual <= 1e-8
    singular = np.linalg.svd(model.blocks[0], compute_uv=False)
    assert np.all(np.minimum(np.abs(singular - r), np.abs(singular - 1.0 / r)) <= 1e-9)


def test_qa_blocks_are_scaled_c1r_blocks():
    r = 0.6
    tup = OperatorTuple.of(r, gen_random_qar(4, 3, r))
    qa_model = dilate_qar(tup, 128)
    inner = dilate_c1r(OperatorTuple.of(r * r, r * tup.ops[0]), 128)
    assert np.array_equal(qa_model.blocks, inner.blocks / r)


def test_qa_rejects_non_members():
    with pytest.raises(MembershipError):
        dilate_qar(OperatorTuple.of(0.5, 3.0 * np.eye(2)), 64)


def test_export_payload(scalar_tuple):
    payload = build_dilation(build_symbols(scalar_tuple), 16).to_dict()
    assert payload['N'] == 16
    assert len(payload['nodes']) == 16
    assert len(payload['blocks'][0]) == 16


@pytest.mark.slow
@pytest.mark.parametrize(
    'make',
    [
        lambda: OperatorTuple.of(0.5, np.array([[0.8]])),
        lambda: gen_normal_tuple(7, 3, 3, 0.8),
    ],
    ids=['scalar', 'normal'],
)
def test_moments_converge(make):
    tup = make()
    sym = build_symbols(tup)
    ratio, coarse, fine = convergence_ratio(sym, 8192, max_power=3)
    assert coarse.max() <= 5e-3
    assert fine.max() <= 5e-3
    assert 0.25 <= ratio <= 0.75


@pytest.mark.slow
def test_tensor_pair_moments(tensor_pair):
    model = dilate_c1r(tensor_pair, 8192)
    assert verify_moments(model, max_power=3).max() <= 5e-3


@pytest.mark.slow
def test_qa_identity_moments():
    model = dilate_qar(OperatorTuple.of(0.5, np.eye(2)), 8192)
    table = verify_moments(model, max_power=3)
    assert table.max() <= 5e-3
