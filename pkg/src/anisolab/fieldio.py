"""Binary field container and run-metadata sidecars.

Layout of a ``.fld`` file, all integers little-endian:

====== ====== =====================================================
offset size   content
====== ====== =====================================================
0      8      magic ``b"ANISOFLD"``
8      4      format version, uint32 (currently 1)
12     4      header length ``H`` in bytes, uint32
16     H      UTF-8 JSON header: ``box_lengths`` (3 floats),
              ``resolution`` (3 ints), ``fields`` (list of names)
16+H   ...    one payload block per field name, in header order
====== ====== =====================================================

Each payload block holds ``N1*N2*N3`` little-endian float64
physical-space samples with the vertical index varying slowest: the
value at grid point ``(i1, i2, i3)`` sits at flat position
``(i3 * N1 + i1) * N2 + i2``, so a file is a stack of horizontal
slabs from bottom to top.

Metadata sidecars are plain JSON documents with sorted keys; writers
pass any JSON-serializable mapping (scheme, dt history, rejection
counts, seeds and so on).
"""

from __future__ import annotations

import json
import os
import re
import struct
import tempfile
from typing import Mapping

import numpy as np

from .field import ScalarField, VectorField, from_values
from .grid import Grid

__all__ = [
    "FieldIOError",
    "load_fields",
    "load_vector_fields",
    "read_metadata",
    "save_fields",
    "save_vector_fields",
    "write_metadata",
]

_MAGIC = b"ANISOFLD"
_VERSION = 1


class FieldIOError(ValueError):
    pass


def _atomic_write(path: str, payload: bytes):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_fields(path: str, fields: Mapping[str, ScalarField]):
    """Write named scalar fields sharing one grid to a container file."""
    if not fields:
        raise FieldIOError("refusing to write a container with no fields")
    names = list(fields)
    grid = fields[names[0]].grid
    for name in names:
        if not fields[name].grid.compatible(grid):
            raise FieldIOError(f"field {name!r} lives on a different grid")
    header = json.dumps(
        {
            "box_lengths": [float(L) for L in grid.box],
            "resolution": [int(n) for n in grid.shape],
            "fields": names,
        },
        sort_keys=True,
    ).encode()
    parts = [_MAGIC, struct.pack("<II", _VERSION, len(header)), header]
    for name in names:
        vals = fields[name].values()
        # vertical index slowest: stack of horizontal slabs
        parts.append(
            np.ascontiguousarray(np.moveaxis(vals, 2, 0), dtype="<f8").tobytes()
        )
    _atomic_write(path, b"".join(parts))


def load_fields(path: str):
    """Read a container file back into (grid, {name: ScalarField})."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 16 or buf[:8] != _MAGIC:
        raise FieldIOError(f"{path}: not a field container")
    version, hlen = struct.unpack("<II", buf[8:16])
    if version != _VERSION:
        raise FieldIOError(f"{path}: unsupported container version {version}")
    if len(buf) < 16 + hlen:
        raise FieldIOError(f"{path}: truncated header")
    try:
        header = json.loads(buf[16:16 + hlen].decode())
        box = tuple(float(L) for L in header["box_lengths"])
        shape = tuple(int(n) for n in header["resolution"])
        names = list(header["fields"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FieldIOError(f"{path}: malformed header: {exc}") from None
    if len(box) != 3 or len(shape) != 3:
        raise FieldIOError(f"{path}: header must describe a 3-d box")
    grid = Grid(box, shape)
    count = int(np.prod(shape))
    need = 16 + hlen + 8 * count * len(names)
    if len(buf) != need:
        raise FieldIOError(
            f"{path}: payload has {len(buf) - 16 - hlen} bytes, "
            f"expected {8 * count * len(names)}"
        )
    out = {}
    off = 16 + hlen
    n1, n2, n3 = shape
    for name in names:
        flat = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
        vals = np.moveaxis(flat.reshape(n3, n1, n2), 0, 2)
        out[name] = from_values(grid, np.ascontiguousarray(vals))
        off += 8 * count
    return grid, out


def save_vector_fields(path: str, vectors: Mapping[str, VectorField]):
    """Write vector fields with components flattened to name1, name2, ..."""
    flat = {}
    for name, vf in vectors.items():
        for i, comp in enumerate(vf.components):
            flat[f"{name}{i + 1}"] = comp
    save_fields(path, flat)


def load_vector_fields(path: str):
    """Regroup a container written by save_vector_fields.

    Component names must form complete runs name1..nameK (K = 2 or 3);
    anything else in the file is reported, not guessed at.
    """
    grid, flat = load_fields(path)
    groups: dict[str, dict[int, ScalarField]] = {}
    for name, f in flat.items():
        m = re.fullmatch(r"(.+?)([123])", name)
        if not m:
            raise FieldIOError(f"{path}: {name!r} is not a vector component")
        groups.setdefault(m.group(1), {})[int(m.group(2))] = f
    out = {}
    for base, comps in groups.items():
        k = len(comps)
        if sorted(comps) != list(range(1, k + 1)) or k not in (2, 3):
            raise FieldIOError(
                f"{path}: components {sorted(comps)} of {base!r} do not "
                f"form a vector"
            )
        out[base] = VectorField(tuple(comps[i] for i in range(1, k + 1)))
    return grid, out


def write_metadata(path: str, meta: Mapping):
    _atomic_write(
        path, json.dumps(meta, sort_keys=True, indent=2).encode() + b"\n"
    )


def read_metadata(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
