"""On-disk artifacts: field files, target manifests, diagnostics CSV.

Field files are a fixed binary layout, self-describing enough to
rebuild the grid:

    magic   6 bytes  b"NLCHF1"
    version u32      1
    dim     u32
    sizes   u64 per axis
    extents f64 per axis
    payload f64, row-major, little-endian

All header integers and floats are little-endian.  A read of a written
file reproduces the array bitwise.  Time-dependent collections (target
sequences, controls) are one file per slice plus a JSON manifest that
names the files in order.

The CSV writer renders every float with 17 significant digits so the
text round-trips to the identical double, and emits CRLF rows.
"""

from __future__ import annotations

import csv
import json
import os
import struct
from typing import Sequence

import numpy as np

from .control import ControlField
from .errors import FieldIOError
from .fields import Grid, ScalarField, VectorField, make_grid

__all__ = [
    "write_field", "read_field", "write_targets", "read_targets",
    "write_control", "read_control", "write_timeseries", "read_timeseries",
    "TIMESERIES_COLUMNS", "OPTIMIZER_COLUMNS",
]

_MAGIC = b"NLCHF1"
_VERSION = 1

TIMESERIES_COLUMNS = ("step", "time", "mass", "energy", "separation")
OPTIMIZER_COLUMNS = TIMESERIES_COLUMNS + ("cost", "stationarity")


def write_field(field: ScalarField, path: str | os.PathLike) -> None:
    """Write one scalar field; refuses non-finite data."""
    if not np.all(np.isfinite(field.data)):
        raise FieldIOError("refusing to write non-finite field data")
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, g.dim))
        fh.write(struct.pack(f"<{g.dim}Q", *g.n))
        fh.write(struct.pack(f"<{g.dim}d", *g.length))
        fh.write(np.ascontiguousarray(field.data, dtype="<f8").tobytes())


def read_field(path: str | os.PathLike) -> ScalarField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:6] != _MAGIC:
        raise FieldIOError(f"{path}: not a NLCHF1 file")
    off = 6
    version, dim = struct.unpack_from("<II", raw, off)
    off += 8
    if version != _VERSION:
        raise FieldIOError(f"{path}: unsupported version {version}")
    if dim not in (2, 3):
        raise FieldIOError(f"{path}: bad dimension {dim}")
    try:
        sizes = struct.unpack_from(f"<{dim}Q", raw, off)
        off += 8 * dim
        extents = struct.unpack_from(f"<{dim}d", raw, off)
        off += 8 * dim
    except struct.error as e:
        raise FieldIOError(f"{path}: truncated header") from e
    count = 1
    for s in sizes:
        count *= s
    payload = raw[off:]
    if len(payload) != 8 * count:
        raise FieldIOError(
            f"{path}: payload size mismatch, expected {8 * count} bytes "
            f"for sizes {sizes}, got {len(payload)}")
    data = np.frombuffer(payload, dtype="<f8").reshape(sizes).copy()
    if not np.all(np.isfinite(data)):
        raise FieldIOError(f"{path}: non-finite values in payload")
    grid = make_grid(dim, sizes, extents)
    return ScalarField(grid, data)


def write_targets(directory: str | os.PathLike, phi_q: Sequence[ScalarField],
                  phi_omega: ScalarField, dt: float) -> str:
    """Write a tracking-target set; returns the manifest path.

    One field file per time index plus ``targets.json`` naming them in
    order, so partial sets are detectable and single slices remain
    individually inspectable.
    """
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    names = []
    for n, f in enumerate(phi_q):
        name = f"phi_q_{n:04d}.nlchf"
        write_field(f, os.path.join(directory, name))
        names.append(name)
    write_field(phi_omega, os.path.join(directory, "phi_omega.nlchf"))
    manifest = {
        "kind": "targets",
        "dt": dt,
        "n_steps": len(names),
        "phi_q": names,
        "phi_omega": "phi_omega.nlchf",
    }
    path = os.path.join(directory, "targets.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def read_targets(manifest_path: str | os.PathLike):
    """Read a target manifest; returns (phi_q tuple, phi_omega, dt)."""
    manifest_path = os.fspath(manifest_path)
    base = os.path.dirname(manifest_path)
    with open(manifest_path, encoding="utf-8") as fh:
        m = json.load(fh)
    if m.get("kind") != "targets":
        raise FieldIOError(f"{manifest_path}: not a targets manifest")
    phi_q = tuple(read_field(os.path.join(base, name)) for name in m["phi_q"])
    phi_omega = read_field(os.path.join(base, m["phi_omega"]))
    if len(phi_q) != m["n_steps"]:
        raise FieldIOError(
            f"{manifest_path}: manifest n_steps {m['n_steps']} does not "
            f"match {len(phi_q)} listed files")
    return phi_q, phi_omega, float(m["dt"])


def write_control(directory: str | os.PathLike, v: ControlField) -> str:
    """Write a control, one file per slice and component; returns manifest."""
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    slices = []
    for n, s in enumerate(v.slices):
        names = []
        for c, comp in enumerate(s.components):
            name = f"v_{n:04d}_c{c}.nlchf"
            write_field(comp, os.path.join(directory, name))
            names.append(name)
        slices.append(names)
    manifest = {"kind": "control", "dt": v.dt, "slices": slices}
    path = os.path.join(directory, "control.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def read_control(manifest_path: str | os.PathLike) -> ControlField:
    manifest_path = os.fspath(manifest_path)
    base = os.path.dirname(manifest_path)
    with open(manifest_path, encoding="utf-8") as fh:
        m = json.load(fh)
    if m.get("kind") != "control":
        raise FieldIOError(f"{manifest_path}: not a control manifest")
    slices = []
    for names in m["slices"]:
        comps = tuple(read_field(os.path.join(base, name)) for name in names)
        slices.append(VectorField(comps[0].grid, comps))
    if not slices:
        raise FieldIOError(f"{manifest_path}: control has no slices")
    return ControlField(slices[0].grid, float(m["dt"]), tuple(slices))


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_timeseries(path: str | os.PathLike, rows: Sequence[Sequence],
                     columns: Sequence[str] = TIMESERIES_COLUMNS) -> None:
    """Diagnostics table; empty ``rows`` still writes the header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise FieldIOError(
                    f"timeseries row has {len(row)} entries, header has "
                    f"{len(columns)}")
            w.writerow([_fmt(x) for x in row])


def read_timeseries(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Read a diagnostics table back as {column: float array}."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise FieldIOError(f"{path}: empty timeseries file") from None
        cols = {name: [] for name in header}
        for row in r:
            for name, x in zip(header, row):
                cols[name].append(float(x))
    return {name: np.asarray(vals) for name, vals in cols.items()}
