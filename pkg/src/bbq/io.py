"""
File formats: binary field snapshots, time-series CSV and JSON reports.

Snapshot layout (little-endian)::

    magic  4s   b"BBQF"
    version u32 (currently 1)
    n      u32
    L      f64
    kind   u8   0 = real samples, 1 = spectral coefficients
    data   n*n f64 samples, or n*n interleaved (re, im) f64 pairs

All writers go through a temporary file in the target directory followed
by an atomic rename, so readers never observe a partially written file.
"""

from __future__ import annotations

import contextlib
import csv
import io as _io
import json
import math
import os
import struct
import tempfile
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import DataError
from .spectral import GridSpec, RealField, SpectralField

MAGIC = b"BBQF"
VERSION = 1
KIND_REAL = 0
KIND_SPECTRAL = 1
_HEADER = struct.Struct("<4sIIdB")


@contextlib.contextmanager
def atomic_writer(path: str, mode: str = "wb"):
    """Open a temp file next to ``path``; rename over it on success."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"newline": "", "encoding": "utf-8"})) as fh:
            yield fh
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_field(path: str, f: Union[RealField, SpectralField]) -> None:
    if isinstance(f, RealField):
        kind, data = KIND_REAL, np.ascontiguousarray(f.samples, dtype="<f8")
    elif isinstance(f, SpectralField):
        kind, data = KIND_SPECTRAL, np.ascontiguousarray(f.coeffs, dtype="<c16")
    else:
        raise TypeError(f"cannot write {type(f).__name__}")
    grid = f.grid
    with atomic_writer(path) as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, grid.n, float(grid.domain_length), kind))
        fh.write(data.tobytes(order="C"))


def read_field(path: str) -> Union[RealField, SpectralField]:
    """Read a snapshot; raises DataError on any malformed content."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read snapshot {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, n, L, kind = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    if kind not in (KIND_REAL, KIND_SPECTRAL):
        raise DataError(f"{path}: unknown kind {kind}")
    try:
        grid = GridSpec(int(n), float(L))
    except ValueError as exc:
        raise DataError(f"{path}: invalid grid in header: {exc}") from exc
    width = 8 if kind == KIND_REAL else 16
    expected = _HEADER.size + n * n * width
    if len(raw) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(raw)}")
    body = raw[_HEADER.size:]
    if kind == KIND_REAL:
        samples = np.frombuffer(body, dtype="<f8").reshape(n, n).astype(float)
        return RealField(grid, samples)
    coeffs = np.frombuffer(body, dtype="<c16").reshape(n, n).astype(complex)
    if not np.all(np.isfinite(coeffs)):
        raise DataError(f"{path}: non-finite coefficients")
    return SpectralField(grid, coeffs)


# ---------------------------------------------------------------------------
# CSV


def format_value(v: Any) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> None:
    text = csv_text(columns, rows)
    with atomic_writer(path, "w") as fh:
        fh.write(text)


def read_csv(path: str) -> Tuple[List[str], List[Dict[str, float]]]:
    """Read a numeric CSV written by :func:`write_csv`.

    Raises DataError naming the first malformed row (1-based line number).
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if text and not text.endswith("\n"):
        n_lines = text.count("\n") + 1
        raise DataError(f"{path}: line {n_lines} is truncated (no line terminator)")
    reader = csv.reader(_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{path}: empty file") from None
    rows = []
    for lineno, fields in enumerate(reader, start=2):
        if len(fields) != len(header):
            raise DataError(
                f"{path}: line {lineno} has {len(fields)} fields, expected {len(header)}"
            )
        try:
            rows.append({k: float(v) for k, v in zip(header, fields)})
        except ValueError:
            raise DataError(f"{path}: line {lineno} contains a non-numeric value") from None
    return header, rows


# ---------------------------------------------------------------------------
# JSON


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else format_value(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def json_text(obj: Any) -> str:
    """Canonical JSON: sorted keys, fixed indentation, non-finite floats as
    strings."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str, obj: Any) -> None:
    text = json_text(obj)
    with atomic_writer(path, "w") as fh:
        fh.write(text)


def read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def norm_record(field_id: str, s: float, p: float, q: float, homogeneous: bool,
                value: float, j_min: int, j_max: int) -> Dict[str, Any]:
    """One Besov norm report entry."""
    return {"field_id": field_id, "s": float(s), "p": float(p), "q": float(q),
            "homogeneous": bool(homogeneous), "value": float(value),
            "j_min": int(j_min), "j_max": int(j_max)}
