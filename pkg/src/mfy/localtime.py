"""Occupation measures and local-time estimates of a path over time windows.

The estimator is an endpoint-split histogram: each time step contributes dt/2
to the cell of each of its endpoints, so mass and window-additivity are exact
and smoothing is left to the downstream kernel convolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mfy.kernels import SpatialGrid
from mfy.paths import SamplePath, HolderEstimate, dyadic_levels


class GridExitError(RuntimeError):
    """The path left the spatial grid; carries the first exit time."""

    def __init__(self, t_exit: float):
        super().__init__(f"path exits the spatial grid at t={t_exit:.6g}")
        self.t_exit = t_exit


@dataclass
class OccupationDensity:
    """Time spent per cell over a window (s, t), divided by cell volume."""

    grid: SpatialGrid
    window: tuple
    density: np.ndarray  # shape grid.shape, nonnegative

    @property
    def mass(self) -> float:
        return float(self.density.sum() * self.grid.cell_volume)


def _cell_indices(grid: SpatialGrid, points: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Nearest-node indices, shape (m, d); raises GridExitError on the first exit."""
    idx = np.rint((points + grid.half_width) / grid.h).astype(np.int64)
    bad = (idx < 0) | (idx >= grid.n_cells)
    if bad.any():
        first = int(np.argmax(bad.any(axis=1)))
        raise GridExitError(float(times[first]))
    return idx


def occupation_measure(Z: SamplePath, grid: SpatialGrid, s: float, t: float) -> OccupationDensity:
    """Occupation density of Z over [s, t] on the grid.

    Each step of the grid contributes dt/2 at the cell of each endpoint;
    total mass is exactly (t - s) and windows add cellwise.
    """
    if Z.dim != grid.dim:
        raise ValueError(f"path dim {Z.dim} != grid dim {grid.dim}")
    i, j = Z.grid.index_of(s), Z.grid.index_of(t)
    if j < i:
        raise ValueError("need s <= t")
    vals = Z.values[i:j + 1]
    idx = _cell_indices(grid, vals, Z.times[i:j + 1])

    dt = Z.grid.dt
    weights = np.full(idx.shape[0], dt, dtype=float)
    if idx.shape[0] >= 1:
        weights[0] = dt / 2.0
        weights[-1] = dt / 2.0
    if i == j:
        weights[:] = 0.0

    flat = np.ravel_multi_index(tuple(idx.T), grid.shape)
    hist = np.bincount(flat, weights=weights, minlength=grid.n_cells ** grid.dim)
    density = hist.reshape(grid.shape) / grid.cell_volume
    return OccupationDensity(grid, (s, t), density)


def occupation_increments(Z: SamplePath, grid: SpatialGrid) -> np.ndarray:
    """Per-step occupation masses at the nodes, shape (n_steps,) + grid.shape.

    Row k is the histogram of the step [t_k, t_{k+1}] (dt/2 at each endpoint
    cell); cumulative sums of rows reproduce occupation_measure exactly.
    """
    idx = _cell_indices(grid, Z.values, Z.times)
    flat = np.ravel_multi_index(tuple(idx.T), grid.shape)
    n = Z.grid.n_steps
    size = grid.n_cells ** grid.dim
    dt = Z.grid.dt
    out = np.zeros((n, size))
    rows = np.arange(n)
    np.add.at(out, (rows, flat[:-1]), dt / 2.0)
    np.add.at(out, (rows, flat[1:]), dt / 2.0)
    return out.reshape((n,) + grid.shape)


def local_time_time_regularity(Z: SamplePath, grid: SpatialGrid, gamma: float,
                               lag_range: tuple[float, float] | None = None) -> HolderEstimate:
    """Time regularity of the local time in L^2(grid) over dyadic windows.

    Returns sup over dyadic windows of ||L_{s,t}||_{L^2} / (t-s)^gamma and the
    fitted exponent of the per-level sup of ||L_{s,t}||_{L^2} against the lag.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma must lie in (0,1), got {gamma}")
    n = Z.grid.n_steps
    incs = occupation_increments(Z, grid).reshape(n, -1)
    cum = np.zeros((n + 1, incs.shape[1]))
    np.cumsum(incs, axis=0, out=cum[1:])

    vol = grid.cell_volume
    lags, sups = [], []
    seminorm = 0.0
    for level, step in dyadic_levels(n):
        if step == 0:
            continue
        windows = cum[step::step] - cum[:-step:step]
        # density = mass/vol; ||L||_L2 = sqrt(sum density^2 * vol)
        l2 = np.sqrt((windows ** 2).sum(axis=1) / vol)
        lag = Z.times[step]
        lags.append(lag)
        sups.append(float(l2.max()))
        seminorm = max(seminorm, float(l2.max()) / lag ** gamma)

    lags = np.array(lags)
    sups = np.array(sups)
    keep = sups > 0
    if lag_range is not None:
        lo, hi = lag_range
        keep &= (lags >= lo * (1 - 1e-12)) & (lags <= hi * (1 + 1e-12))
    if keep.sum() >= 2:
        slope = float(np.polyfit(np.log(lags[keep]), np.log(sups[keep]), 1)[0])
    else:
        slope = float("nan")
    return HolderEstimate(seminorm=seminorm, fitted_exponent=slope, lags_used=lags[keep])
