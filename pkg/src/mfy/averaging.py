"""Averaged interaction fields along a path, two ways, and their norms.

The averaged field of a kernel K along a path Z accumulates K(x + Z_r) in
time.  The direct route integrates the continuous kernel formula with the
trapezoid rule; the convolution route pushes the occupation density of Z
through an FFT convolution with the kernel table.  Cumulative storage makes
time increments additive by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mfy.kernels import (Kernel, SpatialGrid, GriddedField, evaluate_on_grid,
                         evaluate_on_doubled_grid)
from mfy.localtime import OccupationDensity, occupation_increments
from mfy.paths import SamplePath, TimeGrid, dyadic_levels
from mfy.rng import stream


# ---------------------------------------------------------------------------
# Multilinear interpolation with boundary clamping
# ---------------------------------------------------------------------------

class ClampCounter:
    """Counts spatial queries that fell outside the grid and were clamped."""

    def __init__(self):
        self.count = 0


def interp_values(values: np.ndarray, grid: SpatialGrid, points: np.ndarray,
                  clamp: ClampCounter | None = None) -> np.ndarray:
    """Multilinear interpolation of a nodal field at arbitrary points.

    values: grid.shape + (c,); points: (m, d).  Points outside the node hull
    are clamped to the boundary; the clamp counter records how many.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = grid.dim
    n = grid.n_cells
    u = (pts + grid.half_width) / grid.h  # node coordinates
    outside = (u < 0.0) | (u > n - 1)
    if outside.any() and clamp is not None:
        clamp.count += int(outside.any(axis=1).sum())
    u = np.clip(u, 0.0, n - 1)
    i0 = np.minimum(u.astype(np.int64), n - 2)
    frac = u - i0

    m = pts.shape[0]
    c = values.shape[-1]
    flat = values.reshape(-1, c)
    out = np.zeros((m, c))
    strides = np.array([n ** (d - 1 - ax) for ax in range(d)], dtype=np.int64)
    base = i0 @ strides
    for corner in range(1 << d):
        offs = np.array([(corner >> (d - 1 - ax)) & 1 for ax in range(d)], dtype=np.int64)
        w = np.ones(m)
        for ax in range(d):
            w = w * (frac[:, ax] if offs[ax] else (1.0 - frac[:, ax]))
        out += w[:, None] * flat[base + offs @ strides]
    return out


@dataclass
class GammaNorm:
    """Space-time norm of an averaged field: max of the measured rate components.

    components = (sup-value rate, sup-gradient rate, Lipschitz rate,
    gradient-Lipschitz rate), each a sup over dyadic time pairs and sampled
    space pairs of the corresponding ratio.
    """

    gamma: float
    alpha: int
    value: float
    components: tuple
    fitted_time_exponent: float


class AveragedField:
    """Cumulative averaged field on a spatial x time grid, with gradient.

    cumulative[k] holds the field accumulated over [0, t_k] at the grid nodes
    (shape (n_t+1,) + spatial + (c,)); increments are differences of
    cumulative slices, so window additivity is exact and the diagonal is zero.
    """

    def __init__(self, sgrid: SpatialGrid, tgrid: TimeGrid, cumulative: np.ndarray):
        expected = (tgrid.n_steps + 1,) + sgrid.shape
        if cumulative.shape[:-1] != expected:
            raise ValueError(f"cumulative shape {cumulative.shape} != {expected} + (c,)")
        self.sgrid = sgrid
        self.tgrid = tgrid
        self.cumulative = cumulative
        self.clamp = ClampCounter()
        axes = tuple(range(1, 1 + sgrid.dim))
        grads = np.gradient(cumulative, sgrid.h, axis=axes)
        if sgrid.dim == 1:
            grads = [grads]
        self.gradient = np.stack(grads, axis=-1)  # (..., c, d)

    @property
    def channels(self) -> int:
        return self.cumulative.shape[-1]

    @property
    def clamp_count(self) -> int:
        return self.clamp.count

    def increment(self, i: int, j: int) -> np.ndarray:
        """Field increment over [t_i, t_j] at the nodes."""
        return self.cumulative[j] - self.cumulative[i]

    def eval_increment(self, i: int, j: int, points: np.ndarray) -> np.ndarray:
        """Interpolate the [t_i, t_j] increment at points (m, d) -> (m, c)."""
        return interp_values(self.increment(i, j), self.sgrid, points, self.clamp)

    def gradient_increment(self, i: int, j: int) -> np.ndarray:
        return self.gradient[j] - self.gradient[i]

    def with_constant_drift(self, b) -> "AveragedField":
        """A copy whose increments gain (t-s) * b, constant in space."""
        b = np.broadcast_to(np.asarray(b, dtype=float), (self.channels,))
        extra = self.tgrid.times.reshape((-1,) + (1,) * (self.sgrid.dim + 1)) * b
        return AveragedField(self.sgrid, self.tgrid, self.cumulative + extra)


def averaged_field_direct(kernel: Kernel, Z: SamplePath, sgrid: SpatialGrid,
                          tgrid: TimeGrid | None = None) -> AveragedField:
    """Build the averaged field by trapezoid quadrature of K(x + Z_r).

    Shifted evaluations use the continuous (mollified) kernel formula, not the
    gridded table.  tgrid defaults to Z's grid and must match it.
    """
    tgrid = tgrid or Z.grid
    if tgrid.n_steps != Z.grid.n_steps or tgrid.horizon != Z.grid.horizon:
        raise ValueError("time grid must match the path grid")
    if Z.dim != sgrid.dim:
        raise ValueError("path and spatial grid dimension mismatch")

    nodes = sgrid.nodes()
    n_t = tgrid.n_steps
    dt = tgrid.dt
    c = kernel.out_dim
    vals = np.empty((n_t + 1, nodes.shape[0], c))
    chunk = max(1, (1 << 22) // max(1, nodes.shape[0]))
    for lo in range(0, n_t + 1, chunk):
        hi = min(lo + chunk, n_t + 1)
        pts = (nodes[None, :, :] + Z.values[lo:hi, None, :]).reshape(-1, sgrid.dim)
        vals[lo:hi] = kernel(pts).reshape(hi - lo, nodes.shape[0], c)
    cumulative = np.zeros((n_t + 1, nodes.shape[0], c))
    np.cumsum(0.5 * dt * (vals[1:] + vals[:-1]), axis=0, out=cumulative[1:])
    return AveragedField(sgrid, tgrid, cumulative.reshape((n_t + 1,) + sgrid.shape + (c,)))


def averaged_field_convolution(kernel: Kernel, occ, sgrid: SpatialGrid,
                               tgrid: TimeGrid | None = None, *,
                               Z: SamplePath | None = None,
                               chunk: int = 256) -> AveragedField:
    """Build the averaged field as an FFT convolution with the occupation density.

    occ is a sequence of per-step OccupationDensity increments on sgrid (or
    pass Z to histogram it here).  The kernel table is evaluated on the
    doubled node set and the densities are zero-padded to 2x per axis, so the
    discrete convolution is exact for node-supported mass.
    """
    if Z is not None:
        tgrid = tgrid or Z.grid
        masses = occupation_increments(Z, sgrid)  # (n_t,) + shape
    else:
        occ = list(occ)
        if tgrid is None:
            raise ValueError("tgrid is required when passing densities")
        if len(occ) != tgrid.n_steps:
            raise ValueError(f"need one density increment per step "
                             f"({tgrid.n_steps}), got {len(occ)}")
        for o in occ:
            if o.grid != sgrid:
                raise ValueError("occupation density grid mismatch")
        masses = np.stack([o.density for o in occ]) * sgrid.cell_volume

    ktab = evaluate_on_doubled_grid(kernel, sgrid)  # (2n,)*d + (c,)
    d, n, c = sgrid.dim, sgrid.n_cells, kernel.out_dim
    axes = tuple(range(d))
    khat = np.fft.fftn(ktab, axes=axes)  # (2n,)*d + (c,)

    n_t = masses.shape[0]
    cum_mass = np.zeros((n_t + 1,) + sgrid.shape)
    np.cumsum(masses, axis=0, out=cum_mass[1:])

    pad_shape = (2 * n,) * d
    sl = tuple(slice(0, n) for _ in range(d))
    cumulative = np.empty((n_t + 1,) + sgrid.shape + (c,))
    for lo in range(0, n_t + 1, chunk):
        hi = min(lo + chunk, n_t + 1)
        block = np.zeros((hi - lo,) + pad_shape)
        block[(slice(None),) + sl] = cum_mass[lo:hi]
        bhat = np.fft.fftn(block, axes=tuple(a + 1 for a in axes))
        # correlation: G_m = sum_j K(x_m + x_j) L_j  ->  ifft(khat * conj(bhat))
        prod = khat[None, ...] * np.conj(bhat)[..., None]
        conv = np.fft.ifftn(prod, axes=tuple(a + 1 for a in axes)).real
        cumulative[lo:hi] = conv[(slice(None),) + sl]
    return AveragedField(sgrid, tgrid, cumulative)


# ---------------------------------------------------------------------------
# Norms and interpolation diagnostics
# ---------------------------------------------------------------------------

def _space_pairs(sgrid: SpatialGrid, budget: int):
    """Index pairs: all axis-neighbours plus `budget` random node pairs."""
    size = sgrid.n_cells ** sgrid.dim
    idx = np.arange(size).reshape(sgrid.shape)
    pairs_a, pairs_b = [], []
    for ax in range(sgrid.dim):
        a = np.moveaxis(idx, ax, 0)
        pairs_a.append(a[:-1].ravel())
        pairs_b.append(a[1:].ravel())
    a = np.concatenate(pairs_a)
    b = np.concatenate(pairs_b)
    if budget > 0:
        rng = stream(0x6D6679, sgrid.n_cells, budget)
        i = rng.integers(0, size, size=budget)
        j = rng.integers(0, size, size=budget)
        keep = i != j
        a = np.concatenate([a, i[keep]])
        b = np.concatenate([b, j[keep]])
    nodes = sgrid.nodes()
    dist = np.linalg.norm(nodes[a] - nodes[b], axis=-1)
    return a, b, dist


def gamma_norm(G: AveragedField, gamma: float, alpha: int = 2,
               space_pair_budget: int = 2048) -> GammaNorm:
    """Measured space-time rates of an averaged field over dyadic time pairs.

    Components: sup |G_{s,t}| / lag^g, sup |grad G_{s,t}| / lag^g, the spatial
    Lipschitz rate of G_{s,t} and (alpha=2 only) of grad G_{s,t}.  Also fits
    the time exponent of sup_x |G_{s,t}(x)| against the lag, which diagnoses
    which gamma the field actually admits.
    """
    if not (0.5 < gamma < 1.0):
        raise ValueError(f"gamma must lie in (1/2, 1), got {gamma}")
    if alpha not in (1, 2):
        raise ValueError("alpha must be 1 or 2")
    n_t = G.tgrid.n_steps
    times = G.tgrid.times
    c = G.channels
    a, b, dist = _space_pairs(G.sgrid, space_pair_budget)

    flat_cum = G.cumulative.reshape(n_t + 1, -1, c)
    flat_grad = G.gradient.reshape(n_t + 1, -1, c * G.sgrid.dim)

    comp_val = comp_grad = comp_lip = comp_glip = 0.0
    lags, sup_vals = [], []
    row_chunk = 256
    for level, step in dyadic_levels(n_t):
        lag = times[step]
        rate = lag ** gamma
        sup_v = 0.0
        n_pairs = n_t // step
        for lo in range(0, n_pairs, row_chunk):
            hi = min(lo + row_chunk, n_pairs)
            rows = np.arange(lo, hi)
            inc = flat_cum[(rows + 1) * step] - flat_cum[rows * step]   # (m, nodes, c)
            ginc = flat_grad[(rows + 1) * step] - flat_grad[rows * step]
            sup_v = max(sup_v, float(np.linalg.norm(inc, axis=-1).max()))
            comp_grad = max(comp_grad, float(np.linalg.norm(ginc, axis=-1).max()) / rate)
            dv = np.linalg.norm(inc[:, a, :] - inc[:, b, :], axis=-1)
            comp_lip = max(comp_lip, float((dv / dist).max()) / rate)
            if alpha == 2:
                dg = np.linalg.norm(ginc[:, a, :] - ginc[:, b, :], axis=-1)
                comp_glip = max(comp_glip, float((dg / dist).max()) / rate)
        lags.append(lag)
        sup_vals.append(sup_v)
        comp_val = max(comp_val, sup_v / rate)

    lags = np.array(lags)
    sup_vals = np.array(sup_vals)
    keep = sup_vals > 0
    if keep.sum() >= 2:
        slope = float(np.polyfit(np.log(lags[keep]), np.log(sup_vals[keep]), 1)[0])
    else:
        slope = float("nan")
    components = (comp_val, comp_grad, comp_lip, comp_glip)
    return GammaNorm(gamma=gamma, alpha=alpha, value=float(max(components)),
                     components=components, fitted_time_exponent=slope)


def holder_space_norm(field_inc: np.ndarray, sgrid: SpatialGrid, theta: float,
                      space_pair_budget: int = 2048) -> float:
    """Discrete C^theta spatial norm sup|f| + sup |f(x)-f(y)|/|x-y|^theta."""
    c = field_inc.shape[-1]
    flat = field_inc.reshape(-1, c)
    sup = float(np.linalg.norm(flat, axis=-1).max())
    if theta <= 0:
        return sup
    a, b, dist = _space_pairs(sgrid, space_pair_budget)
    dv = np.linalg.norm(flat[a] - flat[b], axis=-1)
    return sup + float((dv / dist ** theta).max())


def interpolation_check(G: AveragedField, theta: float, slack: float = 1.1,
                        space_pair_budget: int = 2048) -> bool:
    """Log-convexity surrogate of Besov interpolation on dyadic time pairs.

    Checks ||G_{s,t}||_{C^theta} <= slack * ||G_{s,t}||_{C^1}^theta *
    ||G_{s,t}||_{C^0}^{1-theta} for every adjacent dyadic pair, where C^1 uses
    the finite-difference gradient.  theta in {0,1} reduces to equalities.
    """
    if not (0.0 <= theta <= 1.0):
        raise ValueError("theta must lie in [0,1]")
    n_t = G.tgrid.n_steps
    a, b, dist = _space_pairs(G.sgrid, space_pair_budget)
    c = G.channels
    flat_cum = G.cumulative.reshape(n_t + 1, -1, c)
    flat_grad = G.gradient.reshape(n_t + 1, -1, c * G.sgrid.dim)

    row_chunk = 256
    for level, step in dyadic_levels(n_t):
        n_pairs = n_t // step
        for lo in range(0, n_pairs, row_chunk):
            hi = min(lo + row_chunk, n_pairs)
            rows = np.arange(lo, hi)
            inc = flat_cum[(rows + 1) * step] - flat_cum[rows * step]
            ginc = flat_grad[(rows + 1) * step] - flat_grad[rows * step]
            c0 = np.linalg.norm(inc, axis=-1).max(axis=1)
            c1 = c0 + np.linalg.norm(ginc, axis=-1).max(axis=1)
            if theta == 0.0:
                lhs = c0
            elif theta == 1.0:
                # gradient sup and Lipschitz rate differ on a grid; compare
                # like with like by using the same C^1 surrogate on both sides
                lhs = c1
            else:
                dv = np.linalg.norm(inc[:, a, :] - inc[:, b, :], axis=-1)
                lhs = c0 + (dv / dist[None, :] ** theta).max(axis=1)
            rhs = slack * c1 ** theta * c0 ** (1.0 - theta)
            scale = 1e-14 * max(1.0, c0.max(initial=0.0))
            if not np.all(lhs <= rhs + scale):
                return False
    return True
