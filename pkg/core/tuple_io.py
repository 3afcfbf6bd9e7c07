"""Tuple files and JSON reports.

A tuple file is a JSON object::

    {"r": 0.5, "operators": [{"dim": 2, "data": [[re, im], ...]}, ...]}

with ``data`` holding ``dim * dim`` row-major ``[re, im]`` pairs.  Files
are written in canonical form (sorted keys, shortest round-trip float
repr, trailing newline), so parsing and re-dumping a canonical file
reproduces it byte for byte.

Reports wrap every command result in ``{"command", "input_digest",
"tolerances", "results", "status"}``.  Files are written atomically
(temporary file in the target directory, then ``os.replace``).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from django.core.serializers.json import DjangoJSONEncoder

from .exceptions import TupleFormatError
from .matrix_core import ToleranceConfig
from .operator_classes import OperatorTuple

PathLike = Union[str, Path]


# ---------------------------------------------------------------------------
# Parsing


def _number(value: Any, position: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TupleFormatError(f"expected a number, got {value!r}", position)
    if not math.isfinite(value):
        raise TupleFormatError('non-finite number', position)
    return float(value)


def _operator(entry: Any, index: int) -> np.ndarray:
    where = f"operators[{index}]"
    if not isinstance(entry, dict):
        raise TupleFormatError('operator entry must be an object', where)
    dim = entry.get('dim')
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise TupleFormatError(f"dim must be a positive integer, got {dim!r}", f"{where}.dim")
    data = entry.get('data')
    if not isinstance(data, list):
        raise TupleFormatError('data must be a list of [re, im] pairs', f"{where}.data")
    if len(data) != dim * dim:
        raise TupleFormatError(
            f"operator is not square: {len(data)} entries for dim {dim} (expected {dim * dim})",
            f"{where}.data",
        )
    values = np.empty(dim * dim, dtype=np.complex128)
    for k, pair in enumerate(data):
        position = f"{where}.data[{k}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise TupleFormatError(f"expected a [re, im] pair, got {pair!r}", position)
        values[k] = complex(_number(pair[0], position), _number(pair[1], position))
    return values.reshape(dim, dim)


def parse_tuple(text: str, r_override: Optional[float] = None) -> OperatorTuple:
    """Parse tuple-file text; ``r_override`` replaces the embedded radius."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TupleFormatError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(payload, dict):
        raise TupleFormatError('top level must be an object', '$')
    if r_override is None:
        if 'r' not in payload:
            raise TupleFormatError('missing radius', 'r')
        r = _number(payload['r'], 'r')
    else:
        r = float(r_override)
    operators = payload.get('operators')
    if not isinstance(operators, list) or not operators:
        raise TupleFormatError('operators must be a non-empty list', 'operators')
    mats = [_operator(entry, i) for i, entry in enumerate(operators)]
    for i, M in enumerate(mats[1:], start=1):
        if M.shape != mats[0].shape:
            raise TupleFormatError(
                f"dimension {M.shape[0]} differs from operators[0] ({mats[0].shape[0]})",
                f"operators[{i}].dim",
            )
    return OperatorTuple(r=r, ops=tuple(mats))


def read_tuple(path: PathLike, r_override: Optional[float] = None) -> OperatorTuple:
    return parse_tuple(Path(path).read_text(encoding='utf-8'), r_override)


# ---------------------------------------------------------------------------
# Writing


def _pairs(M: np.ndarray) -> List[List[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(M).reshape(-1)]


def dump_tuple(tup: OperatorTuple) -> str:
    payload = {
        'r': float(tup.r),
        'operators': [{'dim': int(T.shape[0]), 'data': _pairs(T)} for T in tup.ops],
    }
    return json.dumps(payload, sort_keys=True) + '\n'


def digest(text: Union[str, bytes]) -> str:
    raw = text.encode('utf-8') if isinstance(text, str) else text
    return hashlib.sha256(raw).hexdigest()


def write_atomic(path: PathLike, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``."""
    target = Path(path)
    directory = target.parent if str(target.parent) else Path('.')
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Reports


class ReportEncoder(DjangoJSONEncoder):
    """JSON encoder that also understands numpy scalars, arrays and complex numbers."""

    def default(self, o):
        if isinstance(o, np.ndarray):
            if np.iscomplexobj(o):
                return np.stack([o.real, o.imag], axis=-1).tolist()
            return o.tolist()
        if isinstance(o, (complex, np.complexfloating)):
            return [float(o.real), float(o.imag)]
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, Enum):
            return o.value
        if isinstance(o, Path):
            return str(o)
        return super().default(o)


@dataclass
class Report:
    command: str
    input_digest: str
    tolerances: ToleranceConfig
    results: Dict[str, Any] = field(default_factory=dict)
    status: str = 'ok'

    def as_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'input_digest': self.input_digest,
            'tolerances': self.tolerances.as_dict(),
            'results': self.results,
            'status': self.status,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), cls=ReportEncoder, sort_keys=True, indent=2) + '\n'


def dump_json(payload: Any) -> str:
    return json.dumps(payload, cls=ReportEncoder, sort_keys=True) + '\n'
