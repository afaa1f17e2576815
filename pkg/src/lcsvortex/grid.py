"""Uniform rectilinear grids and their on-disk format.

The serialization format is a plain-text header plus one raw binary file per
array. It is bit-exact: coordinates are written with ``repr`` (shortest
round-trip form) and array payloads are row-major little-endian float64.

Header layout (one statement per line, ``#`` starts a comment)::

    lcsgrid 1
    axis x start=0.0 step=0.0025 size=401 units=
    axis y start=0.0 step=0.0025 size=401 units=
    axis t start=0.0 step=1.0 size=31 units=day
    fill nan
    meta rho=0.1
    array u dims=t,y,x file=sample.u.bin
    array v dims=t,y,x file=sample.v.bin

An axis may alternatively carry ``coords=v0,v1,...`` (explicit coordinates);
these must be uniformly spaced and are normalized to start/step on read.
Values equal to the declared fill value are replaced with NaN on read.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_TAG = "lcsgrid"
FORMAT_VERSION = 1

_UNIFORMITY_RTOL = 1e-8


@dataclass(frozen=True)
class Axis:
    """Uniformly spaced coordinate axis."""

    name: str
    start: float
    step: float
    size: int
    units: str = ""

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"axis '{self.name}' needs at least 2 samples, got {self.size}")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"axis '{self.name}' step must be positive, got {self.step}")

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.size - 1)

    def coords(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.size)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x >= self.start) & (x <= self.stop)

    def cell_fraction(self, x, clamp: bool = True):
        """Map coordinates to (cell index, fractional offset in [0, 1])."""
        x = np.asarray(x, dtype=float)
        u = (x - self.start) / self.step
        idx = np.floor(u).astype(np.int64)
        idx = np.clip(idx, 0, self.size - 2)
        frac = u - idx
        if clamp:
            frac = np.clip(frac, 0.0, 1.0)
        return idx, frac


def axis_from_coords(name: str, coords, units: str = "") -> Axis:
    """Build an Axis from explicit coordinates, validating uniform spacing."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 1 or coords.size < 2:
        raise ValueError(f"axis '{name}' needs a 1D coordinate array of length >= 2")
    steps = np.diff(coords)
    if np.any(steps <= 0):
        raise ValueError(f"axis '{name}' coordinates must be strictly increasing")
    step = float(steps.mean())
    scale = max(abs(coords[0]), abs(coords[-1]), abs(step))
    if np.max(np.abs(steps - step)) > _UNIFORMITY_RTOL * scale:
        raise ValueError(f"axis '{name}' coordinates are not uniformly spaced")
    return Axis(name, float(coords[0]), step, int(coords.size), units)


@dataclass(frozen=True)
class ScalarGrid2D:
    """Scalar samples on a uniform 2D grid, values indexed [y][x]."""

    x_axis: Axis
    y_axis: Axis
    values: np.ndarray

    def __post_init__(self):
        expect = (self.y_axis.size, self.x_axis.size)
        if self.values.shape != expect:
            raise ValueError(f"values shape {self.values.shape} != (ny, nx) {expect}")


def _fmt(x: float) -> str:
    return repr(float(x))


def _axis_line(ax: Axis) -> str:
    return f"axis {ax.name} start={_fmt(ax.start)} step={_fmt(ax.step)} size={ax.size} units={ax.units}"


def write_grid(header_path, axes, arrays, meta=None, fill="nan"):
    """Write axes plus named float64 arrays next to a text header.

    ``arrays`` maps name -> (dims, data) where dims is a tuple of axis names
    in storage order and data matches the corresponding axis sizes.
    """
    header_path = Path(header_path)
    axes = {ax.name: ax for ax in axes}
    stem = header_path.name
    if stem.endswith(".grid"):
        stem = stem[: -len(".grid")]
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}"]
    lines.extend(_axis_line(ax) for ax in axes.values())
    lines.append(f"fill {fill}")
    for key, value in (meta or {}).items():
        lines.append(f"meta {key}={value}")
    binaries = {}
    for name, (dims, data) in arrays.items():
        data = np.asarray(data, dtype=float)
        expect = tuple(axes[d].size for d in dims)
        if data.shape != expect:
            raise ValueError(f"array '{name}' shape {data.shape} != axes {dims} -> {expect}")
        fname = f"{stem}.{name}.bin"
        lines.append(f"array {name} dims={','.join(dims)} file={fname}")
        binaries[fname] = np.ascontiguousarray(data, dtype="<f8")
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header_path.write_text("\n".join(lines) + "\n", encoding="ascii")
    for fname, data in binaries.items():
        (header_path.parent / fname).write_bytes(data.tobytes())


def _parse_kv(tokens):
    out = {}
    for tok in tokens:
        key, _, val = tok.partition("=")
        out[key] = val
    return out


def read_grid(header_path):
    """Read a header+binary grid file; returns (axes, arrays, meta).

    ``axes`` maps name -> Axis, ``arrays`` maps name -> (dims, ndarray) with
    fill values replaced by NaN, ``meta`` maps str -> str.
    """
    header_path = Path(header_path)
    lines = [
        ln.strip()
        for ln in header_path.read_text(encoding="ascii").splitlines()
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if not lines:
        raise ValueError(f"{header_path}: empty grid header")
    tag = lines[0].split()
    if len(tag) != 2 or tag[0] != FORMAT_TAG or int(tag[1]) != FORMAT_VERSION:
        raise ValueError(f"{header_path}: not a {FORMAT_TAG} v{FORMAT_VERSION} header")

    axes: dict[str, Axis] = {}
    arrays: dict[str, tuple] = {}
    meta: dict[str, str] = {}
    fill = float("nan")
    for ln in lines[1:]:
        parts = ln.split()
        kind = parts[0]
        if kind == "axis":
            name = parts[1]
            kv = _parse_kv(parts[2:])
            units = kv.get("units", "")
            if "coords" in kv:
                coords = np.array([float(v) for v in kv["coords"].split(",")])
                axes[name] = axis_from_coords(name, coords, units)
            else:
                axes[name] = Axis(name, float(kv["start"]), float(kv["step"]), int(kv["size"]), units)
        elif kind == "fill":
            fill = float(parts[1])
        elif kind == "meta":
            key, _, val = ln.partition(" ")[2].partition("=")
            meta[key] = val
        elif kind == "array":
            name = parts[1]
            kv = _parse_kv(parts[2:])
            dims = tuple(kv["dims"].split(","))
            shape = tuple(axes[d].size for d in dims)
            raw = (header_path.parent / kv["file"]).read_bytes()
            data = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(float)
            if not math.isnan(fill):
                data = np.where(data == fill, np.nan, data)
            arrays[name] = (dims, data)
        else:
            raise ValueError(f"{header_path}: unknown header statement '{kind}'")
    return axes, arrays, meta


def read_csv_grid(path, coord_columns=("x", "y"), value_columns=("u", "v")):
    """Read a small raster from CSV with coordinate and value columns.

    The rows must cover the full Cartesian product of the unique coordinate
    values (a complete raster). Returns (axes, arrays) where each array is
    indexed [yn][x] (or [t][y][x] when a 't' column is present).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV grid")
    cols = {c: np.array([float(r[c]) for r in rows]) for c in (*coord_columns, *value_columns)}
    axes = {}
    uniques = {}
    for c in coord_columns:
        uniq = np.unique(cols[c])
        uniques[c] = uniq
        axes[c] = axis_from_coords(c, uniq)
    shape = tuple(uniques[c].size for c in reversed(coord_columns))
    if len(rows) != int(np.prod(shape)):
        raise ValueError(f"{path}: {len(rows)} rows do not form a complete raster {shape}")
    # row index in storage order: slowest dim = last coord column (t or y)
    idx = np.zeros(len(rows), dtype=np.int64)
    for c in reversed(coord_columns):
        pos = np.searchsorted(uniques[c], cols[c])
        idx = idx * uniques[c].size + pos
    order = np.argsort(idx)
    if np.unique(idx).size != len(rows):
        raise ValueError(f"{path}: duplicate coordinate rows")
    arrays = {}
    for c in value_columns:
        arrays[c] = cols[c][order].reshape(shape)
    return axes, arrays
