"""File formats: field CSV, structure and sheet JSON, OBJ meshes.

Every writer goes through ``atomic_write``. Numbers are written with 17
significant digits (JSON uses the shortest repr that round-trips), so reading a
file back gives the exact in-memory values.
"""
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .blaschke import BlaschkeStructure, from_arrays
from .exceptions import DomainError
from .grid_fields import Grid2, ScalarField2D
from .immersion import ImmersionSheet

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

PathLike = Union[str, os.PathLike]

_INDEX = ('1', '2')
_LOWER = ((0, 0, '11'), (0, 1, '12'), (1, 1, '22'))


def atomic_write(path: PathLike, text: str):
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path('.')
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix='.tmp', dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"wrote {path}")


def _number(value: float) -> str:
    return f"{float(value):.17g}"


def _header_text(grid: Grid2) -> str:
    x1_min, x1_max, x2_min, x2_max, n1, n2, eps, eta = grid.header()
    floats = ' '.join(_number(v) for v in (x1_min, x1_max, x2_min, x2_max))
    return f"# {floats} {n1} {n2} {eps} {eta}"


def _read_json(path: PathLike) -> dict:
    try:
        with open(path, encoding='utf-8') as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise DomainError(f"input file not found: {path}")
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path} is not valid JSON: {exc}")


def _check_version(payload: dict, kind: str, path: PathLike):
    if payload.get('kind') != kind:
        raise DomainError(f"{path} does not hold a {kind}")
    if payload.get('format_version') != FORMAT_VERSION:
        raise DomainError(f"{path} has format_version {payload.get('format_version')}, expected {FORMAT_VERSION}")


def json_safe(params: dict) -> dict:
    """Scalar and string parameters only; array-valued diagnostics are not persisted."""
    safe = {}
    for key, value in params.items():
        if isinstance(value, (bool, int, float, str)) or value is None:
            safe[key] = value
        elif isinstance(value, np.generic):
            safe[key] = value.item()
    return safe


# Scalar fields

def write_field(path: PathLike, field: ScalarField2D):
    lines = [_header_text(field.grid)]
    lines.extend(_number(v) for v in field.flat())
    atomic_write(path, '\n'.join(lines) + '\n')


def read_field(path: PathLike) -> ScalarField2D:
    try:
        with open(path, encoding='utf-8') as handle:
            lines = [line.strip() for line in handle if line.strip()]
    except FileNotFoundError:
        raise DomainError(f"input file not found: {path}")
    if not lines or not lines[0].startswith('#'):
        raise DomainError(f"{path} lacks the grid header line")
    header = lines[0].lstrip('#').split()
    if len(header) != 8:
        raise DomainError(f"{path} header needs 8 entries, got {len(header)}")
    try:
        grid = Grid2.from_header(header)
        values = np.array([float(v) for v in lines[1:]])
    except ValueError as exc:
        raise DomainError(f"{path} holds a malformed number: {exc}")
    return ScalarField2D(grid, values)


# Structures

def _flat(values: np.ndarray) -> list:
    return np.asarray(values, dtype=float).ravel().tolist()


def structure_payload(s: BlaschkeStructure) -> dict:
    payload: dict[str, Any] = {
        'format_version': FORMAT_VERSION,
        'kind': 'structure',
        'case_tag': s.case_tag,
        'params': json_safe(s.params),
        'grid': s.grid.header(),
    }
    for i, j, name in _LOWER:
        payload[f'h{name}'] = _flat(s.metric.h[..., i, j])
    for label, values in (('nabla', s.nabla.values), ('nabla_hat', s.nabla_hat.values), ('K', s.K.values)):
        for k in range(2):
            for i, j, name in _LOWER:
                payload[f'{label}_{_INDEX[k]}_{name}'] = _flat(values[..., k, i, j])
    for k in range(2):
        for j in range(2):
            payload[f'S_{_INDEX[k]}_{_INDEX[j]}'] = _flat(s.shape.S[..., k, j])
    payload['H'] = _flat(s.shape.H.values)
    payload['tau'] = _flat(s.shape.tau.values)
    return payload


def write_structure(path: PathLike, s: BlaschkeStructure):
    atomic_write(path, json.dumps(structure_payload(s), sort_keys=True) + '\n')


def read_structure(path: PathLike) -> BlaschkeStructure:
    payload = _read_json(path)
    _check_version(payload, 'structure', path)
    grid = Grid2.from_header(payload['grid'])

    def arr(key):
        try:
            return np.array(payload[key], dtype=float).reshape(grid.shape)
        except (KeyError, ValueError) as exc:
            raise DomainError(f"{path}: field {key} is missing or has the wrong size ({exc})")

    h = np.empty(grid.shape + (2, 2))
    for i, j, name in _LOWER:
        h[..., i, j] = h[..., j, i] = arr(f'h{name}')
    three = {}
    for label in ('nabla', 'nabla_hat', 'K'):
        values = np.empty(grid.shape + (2, 2, 2))
        for k in range(2):
            for i, j, name in _LOWER:
                values[..., k, i, j] = values[..., k, j, i] = arr(f'{label}_{_INDEX[k]}_{name}')
        three[label] = values
    S = np.empty(grid.shape + (2, 2))
    for k in range(2):
        for j in range(2):
            S[..., k, j] = arr(f'S_{_INDEX[k]}_{_INDEX[j]}')
    return from_arrays(grid, h, three['nabla'], three['nabla_hat'], three['K'], S,
                       payload.get('case_tag', 'stored'), payload.get('params'))


# Sheets

def sheet_payload(sheet: ImmersionSheet, report: Optional[dict] = None) -> dict:
    payload = {
        'format_version': FORMAT_VERSION,
        'kind': 'sheet',
        'grid': sheet.grid.header(),
        'f': _flat(sheet.f.values),
        'F1': _flat(sheet.F1.values),
        'F2': _flat(sheet.F2.values),
        'xi': _flat(sheet.xi.values),
    }
    if report:
        payload['report'] = report
    return payload


def write_sheet(path: PathLike, sheet: ImmersionSheet, report: Optional[dict] = None):
    atomic_write(path, json.dumps(sheet_payload(sheet, report), sort_keys=True) + '\n')


def read_sheet(path: PathLike) -> ImmersionSheet:
    payload = _read_json(path)
    _check_version(payload, 'sheet', path)
    grid = Grid2.from_header(payload['grid'])
    try:
        parts = [np.array(payload[key], dtype=float) for key in ('f', 'F1', 'F2', 'xi')]
    except (KeyError, ValueError) as exc:
        raise DomainError(f"{path}: sheet arrays are missing or malformed ({exc})")
    return ImmersionSheet.from_arrays(grid, *parts)


# Meshes

def obj_text(sheet: ImmersionSheet) -> str:
    """``v x y z`` per node (row-major, x1 fastest) and one quad per grid cell, 1-based."""
    n1, n2 = sheet.grid.n1, sheet.grid.n2
    lines = [f"# grid {' '.join(str(v) for v in sheet.grid.header())}"]
    lines.extend(f"v {_number(x)} {_number(y)} {_number(z)}" for x, y, z in sheet.f.values.reshape(-1, 3))
    for j in range(n2 - 1):
        for i in range(n1 - 1):
            a = j * n1 + i + 1
            lines.append(f"f {a} {a + 1} {a + 1 + n1} {a + n1}")
    return '\n'.join(lines) + '\n'


def write_obj(path: PathLike, sheet: ImmersionSheet, report: Optional[dict] = None):
    """OBJ mesh plus, when a report is given, a companion ``<name>.report.json``."""
    path = Path(path)
    atomic_write(path, obj_text(sheet))
    if report is not None:
        companion = path.with_name(path.stem + '.report.json')
        body = dict(report, format_version=FORMAT_VERSION, kind='report', grid=sheet.grid.header())
        atomic_write(companion, json.dumps(body, sort_keys=True) + '\n')


def write_output_sheet(path: PathLike, sheet: ImmersionSheet, report: Optional[dict] = None):
    """Sheets go to JSON unless the path ends in ``.obj``."""
    if str(path).lower().endswith('.obj'):
        write_obj(path, sheet, report)
    else:
        write_sheet(path, sheet, report)


def write_report(path: PathLike, report: dict):
    body = dict(report, format_version=FORMAT_VERSION, kind='report')
    atomic_write(path, json.dumps(body, sort_keys=True) + '\n')


def read_config(path: PathLike) -> dict:
    payload = _read_json(path)
    if not isinstance(payload, dict):
        raise DomainError(f"config file {path} must hold a JSON object")
    return payload
