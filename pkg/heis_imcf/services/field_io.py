"""
Field & Report Serialization
============================
Fields are written as flat little-endian float64 in x-fastest node order
with a JSON sidecar; tables are CSV with leading '# key=value' lines.
"""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from heis_imcf.api.errors import ConfigError, DimensionMismatchError
from heis_imcf.models.grid_models import Box, ScalarField

logger = logging.getLogger(__name__)

FIELD_DTYPE = '<f8'


def config_hash(config: dict) -> str:
    """First 16 hex digits of sha256 over canonical JSON"""
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]


def save_field(field: ScalarField, directory, name: str, meta: dict = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data_path = directory / f"{name}.f64"
    np.asarray(field.values, dtype=FIELD_DTYPE).ravel(order='F').tofile(data_path)

    sidecar = {
        'name': name,
        'dtype': FIELD_DTYPE,
        'box': field.box.metadata(),
        'meta': meta or {},
    }
    if field.mask is not None:
        sidecar['labels'] = field.mask.counts()
    write_json(directory / f"{name}.json", sidecar)
    logger.debug(f"Saved field {name} to {data_path}")
    return data_path


def load_field(directory, name: str) -> ScalarField:
    directory = Path(directory)
    sidecar_path = directory / f"{name}.json"
    if not sidecar_path.exists():
        raise ConfigError(f"Missing field sidecar {sidecar_path}", field='resume')
    sidecar = json.loads(sidecar_path.read_text())
    box_meta = sidecar['box']
    box = Box(box_meta['Lxy'], box_meta['Lt'], tuple(box_meta['m']))
    flat = np.fromfile(directory / f"{name}.f64", dtype=FIELD_DTYPE)
    if flat.size != box.size:
        raise DimensionMismatchError(flat.size, box.size)
    return ScalarField(flat.reshape(box.shape, order='F'), box)


def export_field_csv(field: ScalarField, path) -> Path:
    """x,y,t,value rows in x-fastest order"""
    path = Path(path)
    x, y, t = (c.ravel(order='F') for c in field.box.coords)
    values = field.values.ravel(order='F')
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(['x', 'y', 't', 'value'])
        for row in zip(x, y, t, values):
            writer.writerow([repr(float(v)) for v in row])
    return path


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return value


def write_table_csv(path, header: Sequence[str], rows: Iterable[Sequence], meta: dict = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='') as handle:
        for key, value in sorted((meta or {}).items()):
            handle.write(f"# {key}={value}\n")
        writer = csv.writer(handle)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_table_csv(path):
    """(meta, header, rows) with every cell left as text"""
    meta, lines = {}, []
    with Path(path).open() as handle:
        for line in handle:
            if line.startswith('# '):
                key, _, value = line[2:].rstrip('\n').partition('=')
                meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    return meta, header, [row for row in reader]


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value):
            return 'nan'
        if np.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(path, payload: dict, meta: dict = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(payload)
    if meta is not None:
        body = {'meta': meta, **body}
    path.write_text(json.dumps(_jsonable(body), indent=2, sort_keys=True) + '\n')
    return path
