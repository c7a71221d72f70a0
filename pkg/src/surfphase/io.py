"""Plain-text configs, self-describing binary snapshots, CSV and legacy VTK output.

Snapshot layout::

    SURFPHASE-SNAPSHOT 1\\n
    <one line of JSON: grid, time, step, field names, extra metadata>\\n
    <raw little-endian float64 payload, fields in header order, C order>
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

MAGIC = b"SURFPHASE-SNAPSHOT 1\n"


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def parse_config_text(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; later keys win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def read_config_file(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def format_config(values: Mapping[str, object]) -> str:
    lines = []
    for key, value in values.items():
        if isinstance(value, (list, tuple)):
            value = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_snapshot(path, fields: Mapping[str, np.ndarray], meta: Mapping[str, object]) -> None:
    names = list(fields)
    shapes = {tuple(np.shape(fields[k])) for k in names}
    if len(shapes) != 1:
        raise ValueError("snapshot fields must share one shape")
    header = dict(meta)
    header["fields"] = names
    header["shape"] = list(shapes.pop())
    header["dtype"] = "<f8"
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for k in names:
            fh.write(np.ascontiguousarray(fields[k], dtype="<f8").tobytes())
    tmp.replace(path)


def read_snapshot(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ValueError(f"{path} is not a surfphase snapshot")
        header = json.loads(fh.readline())
        payload = fh.read()
    shape = tuple(header["shape"])
    count = int(np.prod(shape))
    data = np.frombuffer(payload, dtype="<f8")
    if data.size != count * len(header["fields"]):
        raise ValueError(f"{path}: payload size does not match header")
    fields = {k: data[i * count:(i + 1) * count].reshape(shape).astype(np.float64) for i, k in enumerate(header["fields"])}
    return header, fields


def write_csv(path, header: Iterable[str], rows: Iterable[Iterable[object]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow(list(row))


def truncate_csv(path, nrows: int) -> None:
    """Keep the header plus the first ``nrows`` data rows."""
    path = Path(path)
    lines = path.read_bytes().splitlines(keepends=True)
    path.write_bytes(b"".join(lines[: nrows + 1]))


def write_vtk(path, fields: Mapping[str, np.ndarray], spacing: float) -> None:
    """Legacy binary VTK STRUCTURED_POINTS (2-D fields get a unit z extent)."""
    arrays = {k: np.asarray(v, dtype=float) for k, v in fields.items()}
    shape = next(iter(arrays.values())).shape
    dims = list(shape) + [1] * (3 - len(shape))
    npts = int(np.prod(dims))
    with open(path, "wb") as fh:
        fh.write(b"# vtk DataFile Version 3.0\nsurfphase snapshot\nBINARY\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n".encode())
        fh.write(b"ORIGIN 0 0 0\n")
        fh.write(f"SPACING {spacing!r} {spacing!r} {spacing!r}\n".encode())
        fh.write(f"POINT_DATA {npts}\n".encode())
        for name, arr in arrays.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n".encode())
            # VTK wants x fastest; arrays are indexed [x, y(, z)]
            fh.write(np.ascontiguousarray(arr.T, dtype=">f8").tobytes())
            fh.write(b"\n")
