"""Shared fixtures for the annulus test-suite."""

from __future__ import annotations

import numpy as np
import pytest

from core.instances import SarasonShiftSpec, gen_random_c1r, gen_sarason, gen_scalar_family, gen_tensor_tuple
from core.matrix_core import ToleranceConfig
from core.operator_classes import OperatorTuple
from core.tuple_io import dump_tuple


@pytest.fixture
def tol() -> ToleranceConfig:
    return ToleranceConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def sarason_spec() -> SarasonShiftSpec:
    return SarasonShiftSpec(alpha=0.3, r=0.5, half_width=8)


@pytest.fixture
def tensor_pair() -> OperatorTuple:
    """Non-normal first entry, scalar second entry, r = 0.7."""
    return gen_tensor_tuple([gen_random_c1r(3, 2, 0.7), gen_scalar_family(1, 0.7, 2)], 0.7)


@pytest.fixture
def sarason_tensor_pair() -> OperatorTuple:
    spec = SarasonShiftSpec(alpha=0.3, r=0.7, half_width=2)
    return gen_tensor_tuple([gen_sarason(spec), gen_scalar_family(1, 0.7, 2)], 0.7)


@pytest.fixture
def write_tuple(tmp_path):
    """Write ``OperatorTuple.of(r, *ops)`` as a tuple file and return its path."""

    def _write(r, *ops, name='tuple.json'):
        path = tmp_path / name
        path.write_text(dump_tuple(OperatorTuple.of(r, *ops)), encoding='utf-8')
        return path

    return _write
