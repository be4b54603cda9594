"""Serialization: CSV and a compact binary format for paths and gridded data.

Binary layouts (little endian):
  paths   MFYP | version u32 | d u32 | n_steps u32 | T f64 | kind 8s | hurst f64
          | values f64 row-major (n_steps+1, d)
  fields  MFYG | version u32 | d u32 | n_cells u32 | half_width f64 | channels u32
          | values f64 row-major
  averaged fields  MFYA | version u32 | spatial header | n_steps u32 | T f64
          | cumulative f64 row-major

CSV floats are printed with 17 significant digits so emitted reports are
byte-reproducible.
"""

from __future__ import annotations

import struct

import numpy as np

from mfy.averaging import AveragedField
from mfy.kernels import GriddedField, SpatialGrid
from mfy.paths import SamplePath, TimeGrid

FLOAT_FMT = "%.17g"


def fmt(x) -> str:
    return FLOAT_FMT % float(x)


def write_csv(path, header, rows):
    """Write rows of mixed ints/floats/strings with fixed float formatting."""
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (int, np.integer)) or isinstance(v, str):
                    cells.append(str(v))
                else:
                    cells.append(fmt(v))
            f.write(",".join(cells) + "\n")


# -- sample paths -----------------------------------------------------------

def write_path_csv(path, sample: SamplePath):
    header = ["t"] + [f"x_{i + 1}" for i in range(sample.dim)]
    rows = [[t] + list(v) for t, v in zip(sample.times, sample.values)]
    write_csv(path, header, rows)


def read_path_csv(path) -> SamplePath:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times, values = data[:, 0], data[:, 1:]
    grid = TimeGrid(float(times[-1]), len(times) - 1)
    return SamplePath(grid, values)


_PATH_HDR = struct.Struct("<4sIIId8sd")


def write_path_bin(path, sample: SamplePath):
    kind = sample.kind.encode()[:8].ljust(8, b"\0")
    hurst = sample.hurst if sample.hurst is not None else float("nan")
    with open(path, "wb") as f:
        f.write(_PATH_HDR.pack(b"MFYP", 1, sample.dim, sample.grid.n_steps,
                               sample.grid.horizon, kind, hurst))
        f.write(np.ascontiguousarray(sample.values).tobytes())


def read_path_bin(path) -> SamplePath:
    with open(path, "rb") as f:
        magic, version, d, n_steps, horizon, kind, hurst = _PATH_HDR.unpack(
            f.read(_PATH_HDR.size))
        if magic != b"MFYP":
            raise ValueError(f"{path} is not a path file")
        values = np.frombuffer(f.read(), dtype="<f8").reshape(n_steps + 1, d)
    grid = TimeGrid(horizon, n_steps)
    return SamplePath(grid, values, kind=kind.rstrip(b"\0").decode(),
                      hurst=None if np.isnan(hurst) else float(hurst))


# -- gridded fields ---------------------------------------------------------

_FIELD_HDR = struct.Struct("<4sIIIdI")


def write_field_bin(path, fld: GriddedField):
    g = fld.grid
    with open(path, "wb") as f:
        f.write(_FIELD_HDR.pack(b"MFYG", 1, g.dim, g.n_cells, g.half_width, fld.channels))
        f.write(np.ascontiguousarray(fld.values).tobytes())


def read_field_bin(path) -> GriddedField:
    with open(path, "rb") as f:
        magic, version, d, n_cells, half_width, channels = _FIELD_HDR.unpack(
            f.read(_FIELD_HDR.size))
        if magic != b"MFYG":
            raise ValueError(f"{path} is not a gridded-field file")
        grid = SpatialGrid(half_width, n_cells, d)
        values = np.frombuffer(f.read(), dtype="<f8").reshape(grid.shape + (channels,))
    return GriddedField(grid, values.copy())


_AVG_HDR = struct.Struct("<4sIIIdIId")


def write_averaged_field_bin(path, G: AveragedField):
    g = G.sgrid
    with open(path, "wb") as f:
        f.write(_AVG_HDR.pack(b"MFYA", 1, g.dim, g.n_cells, g.half_width,
                              G.channels, G.tgrid.n_steps, G.tgrid.horizon))
        f.write(np.ascontiguousarray(G.cumulative).tobytes())


def read_averaged_field_bin(path) -> AveragedField:
    with open(path, "rb") as f:
        magic, version, d, n_cells, half_width, channels, n_steps, horizon = \
            _AVG_HDR.unpack(f.read(_AVG_HDR.size))
        if magic != b"MFYA":
            raise ValueError(f"{path} is not an averaged-field file")
        sgrid = SpatialGrid(half_width, n_cells, d)
        tgrid = TimeGrid(horizon, n_steps)
        shape = (n_steps + 1,) + sgrid.shape + (channels,)
        cumulative = np.frombuffer(f.read(), dtype="<f8").reshape(shape)
    return AveragedField(sgrid, tgrid, cumulative.copy())
