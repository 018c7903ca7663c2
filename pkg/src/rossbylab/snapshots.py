"""Binary state snapshots and diagnostics CSV files.

Snapshot layout (all little-endian, arrays row-major with x fastest):

    magic   4 bytes  'RSBL'
    version 1 byte   (1)
    n       u32
    t       f64
    epsilon f64      (NaN for limit-system states)
    flag    u8       0: primitive state carrying a; 1: limit state carrying R
    scalar  n*n f64  (a or R)
    u_x     n*n f64
    u_y     n*n f64
    pi      n*n f64

CSV files carry one header row naming every record field and decimal values
with 17 significant digits, so float64 round-trips exactly through standard
parsers.
"""

from __future__ import annotations

import struct
from dataclasses import fields
from pathlib import Path
from typing import Union

import numpy as np

from .primitive import PrimitiveState
from .qh import QHState
from .spectral import GridSpec, ScalarField, VectorField

MAGIC = b"RSBL"
VERSION = 1
_HEADER = struct.Struct("<4sBIddB")

State = Union[PrimitiveState, QHState]


def write_snapshot(state: State, path) -> None:
    is_qh = isinstance(state, QHState)
    n = state.grid.n
    scalar = state.R.values if is_qh else state.a.values
    epsilon = float("nan") if is_qh else state.epsilon
    parts = [
        _HEADER.pack(MAGIC, VERSION, n, state.t, epsilon, 1 if is_qh else 0),
        np.ascontiguousarray(scalar, dtype="<f8").tobytes(),
        np.ascontiguousarray(state.u.x_comp.values, dtype="<f8").tobytes(),
        np.ascontiguousarray(state.u.y_comp.values, dtype="<f8").tobytes(),
        np.ascontiguousarray(state.pi.values, dtype="<f8").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


def read_snapshot(path) -> State:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError(
            f"truncated snapshot: {len(blob)} bytes, header needs {_HEADER.size}"
        )
    magic, version, n, t, epsilon, flag = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    if flag not in (0, 1):
        raise ValueError(f"unknown state flag {flag}")
    expected = _HEADER.size + 4 * n * n * 8
    if len(blob) != expected:
        raise ValueError(
            f"truncated snapshot: {len(blob)} bytes at offset {len(blob)}, "
            f"expected {expected}"
        )
    if not np.isfinite(t):
        raise ValueError("non-finite time in snapshot")
    planes = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(4, n, n)
    if not np.isfinite(planes).all():
        raise ValueError("non-finite field values in snapshot")
    grid = GridSpec(n)
    scalar = ScalarField(grid, planes[0].copy())
    u = VectorField(
        ScalarField(grid, planes[1].copy()), ScalarField(grid, planes[2].copy())
    )
    pi = ScalarField(grid, planes[3].copy())
    if flag == 1:
        if not np.isnan(epsilon):
            raise ValueError("limit-system snapshot must carry epsilon = NaN")
        return QHState(t, scalar, u, pi)
    if not np.isfinite(epsilon):
        raise ValueError("non-finite epsilon in primitive snapshot")
    return PrimitiveState(t, epsilon, scalar, u, pi)


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(records: list, path) -> None:
    """Write dataclass records as CSV: header row + 17-significant-digit values."""
    if not records:
        raise ValueError("refusing to write an empty CSV (no header source)")
    names = [f.name for f in fields(records[0])]
    lines = [",".join(names)]
    for rec in records:
        lines.append(",".join(_format_cell(getattr(rec, name)) for name in names))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Minimal reader for tests and tooling: header names + raw cells."""
    text = Path(path).read_text(encoding="utf-8")
    rows = [line.split(",") for line in text.strip().splitlines()]
    return rows[0], rows[1:]
