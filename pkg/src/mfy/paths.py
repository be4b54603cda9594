"""Sample paths on uniform time grids: generation and Hölder regularity.

Noise kinds: fractional Brownian motion (Davies-Harte circulant embedding,
Cholesky fallback), Brownian motion, and the zero path.  Paths are immutable
after creation and fully determined by (kind, d, grid, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mfy.rng import stream


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of n_steps+1 points on [0, horizon]; n_steps a power of two."""

    horizon: float
    n_steps: int
    times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not _is_power_of_two(self.n_steps):
            raise ValueError(f"n_steps must be a power of two, got {self.n_steps}")
        t = np.linspace(0.0, self.horizon, self.n_steps + 1)
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def index_of(self, t: float) -> int:
        """Grid index of time t; raises if t is not a grid point."""
        k = round(t / self.dt)
        if not (0 <= k <= self.n_steps) or abs(k * self.dt - t) > 1e-9 * max(1.0, self.horizon):
            raise ValueError(f"time {t} is not on the grid (dt={self.dt})")
        return int(k)

    def coarsen(self, factor: int) -> "TimeGrid":
        if self.n_steps % factor:
            raise ValueError("coarsening factor must divide n_steps")
        return TimeGrid(self.horizon, self.n_steps // factor)


class SamplePath:
    """A path on a TimeGrid with values in R^d, stored as an (n+1, d) array."""

    def __init__(self, grid: TimeGrid, values: np.ndarray, kind: str = "user",
                 hurst: float | None = None):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != grid.n_steps + 1:
            raise ValueError(
                f"values length {values.shape[0]} does not match grid ({grid.n_steps + 1})")
        values = np.ascontiguousarray(values)
        values.flags.writeable = False
        self.grid = grid
        self.values = values
        self.kind = kind
        self.hurst = hurst

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def at(self, t: float) -> np.ndarray:
        return self.values[self.grid.index_of(t)]

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def restrict_indices(self, i: int, j: int) -> np.ndarray:
        return self.values[i:j + 1]

    def __add__(self, other):
        if isinstance(other, SamplePath):
            if other.grid.n_steps != self.grid.n_steps or other.grid.horizon != self.grid.horizon:
                raise ValueError("grid mismatch")
            return SamplePath(self.grid, self.values + other.values)
        return SamplePath(self.grid, self.values + np.asarray(other, dtype=float))

    def __neg__(self):
        return SamplePath(self.grid, -self.values)


@dataclass
class HolderEstimate:
    """A Hölder seminorm together with a fitted lag-scaling exponent."""

    seminorm: float
    fitted_exponent: float
    lags_used: np.ndarray


class EmbeddingError(RuntimeError):
    """Circulant embedding produced genuinely negative eigenvalues."""


def _fgn_circulant_spectrum(n: int, hurst: float) -> np.ndarray:
    """Eigenvalues of the 2n circulant embedding of the fGn covariance."""
    k = np.arange(n + 1, dtype=float)
    rho = 0.5 * (np.abs(k + 1) ** (2 * hurst) + np.abs(k - 1) ** (2 * hurst)
                 - 2.0 * k ** (2 * hurst))
    c = np.concatenate([rho, rho[1:-1][::-1]])
    g = np.fft.fft(c).real
    # Perrin et al. (2002): the fGn embedding is nonnegative definite, so any
    # negative eigenvalue beyond roundoff scale is a real failure.
    floor = -1e-10 * g.max()
    if g.min() < floor:
        raise EmbeddingError(
            f"circulant embedding not nonnegative (min eigenvalue {g.min():.3e}, H={hurst})")
    return np.clip(g, 0.0, None)


def _fgn_davies_harte(n: int, d: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    """d independent unit-step fGn rows of length n, shape (d, n)."""
    g = _fgn_circulant_spectrum(n, hurst)
    z = np.empty((d, 2 * n), dtype=complex)
    z[:, 0] = rng.standard_normal(d)
    z[:, n] = rng.standard_normal(d)
    v = rng.standard_normal((d, n - 1, 2))
    z[:, 1:n] = (v[..., 0] + 1j * v[..., 1]) / math.sqrt(2.0)
    z[:, n + 1:] = np.conj(z[:, 1:n][:, ::-1])
    return (math.sqrt(2 * n) * np.fft.ifft(np.sqrt(g) * z, axis=1).real)[:, :n]


def _fgn_cholesky(n: int, d: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    """Dense-covariance fallback, O(n^3); only sensible for n <= 2**12."""
    if n > 2 ** 12:
        raise ValueError(f"Cholesky fallback limited to n <= {2**12}, got {n}")
    k = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]).astype(float)
    cov = 0.5 * ((k + 1) ** (2 * hurst) + np.abs(k - 1) ** (2 * hurst) - 2 * k ** (2 * hurst))
    chol = np.linalg.cholesky(cov + 1e-14 * np.eye(n))
    return rng.standard_normal((d, n)) @ chol.T


def gen_noise(kind: str, d: int, grid: TimeGrid, seed,
              hurst: float | None = None, method: str = "auto") -> SamplePath:
    """Generate a zero-at-zero noise path with independent coordinates.

    kind is one of "fbm" (requires hurst in (0,1)), "bm", "zero".  fBm uses the
    Davies-Harte circulant embedding by default; method="cholesky" forces the
    dense fallback (n_steps <= 2**12).  Equal (kind, d, grid, seed) give
    bit-identical paths.  seed may be a tuple (entropy, *stream_key) to place
    e.g. particle i on its own counter-based stream depending only on
    (seed, i).
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    n = grid.n_steps
    if kind == "zero":
        return SamplePath(grid, np.zeros((n + 1, d)), kind="zero")

    rng = stream(*seed) if isinstance(seed, tuple) else stream(seed)
    dt = grid.dt
    if kind == "bm":
        incr = rng.standard_normal((n, d)) * math.sqrt(dt)
    elif kind == "fbm":
        if hurst is None or not (0.0 < hurst < 1.0):
            raise ValueError(f"fbm requires hurst in (0,1), got {hurst}")
        if method == "auto":
            method = "davies-harte"
        if method == "davies-harte":
            if not _is_power_of_two(n):
                raise ValueError("davies-harte requires a power-of-two n_steps; "
                                 "use method='cholesky' for n <= 2**12")
            fgn = _fgn_davies_harte(n, d, hurst, rng)
        elif method == "cholesky":
            fgn = _fgn_cholesky(n, d, hurst, rng)
        else:
            raise ValueError(f"unknown fbm method {method!r}")
        incr = (fgn * dt ** hurst).T
    else:
        raise ValueError(f"unknown noise kind {kind!r}")

    values = np.zeros((n + 1, d))
    np.cumsum(incr, axis=0, out=values[1:])
    return SamplePath(grid, values, kind=kind, hurst=hurst)


# ---------------------------------------------------------------------------
# Dyadic machinery shared across the package
# ---------------------------------------------------------------------------

def dyadic_levels(n_steps: int):
    """Yield (level, index_step) with index_step = n_steps / 2**level."""
    m = int(round(math.log2(n_steps)))
    for level in range(m + 1):
        yield level, n_steps >> level


def dyadic_increment_sups(values: np.ndarray, times: np.ndarray):
    """Per dyadic level, the sup over adjacent pairs of |X_t - X_s|.

    values: (..., n+1, d).  Returns (lags, sups) with sups shaped
    (n_levels, ...) so batches of paths are handled in one pass.
    """
    n = values.shape[-2] - 1
    lags, sups = [], []
    for level, step in dyadic_levels(n):
        sub = values[..., ::step, :]
        inc = np.linalg.norm(np.diff(sub, axis=-2), axis=-1)
        sups.append(inc.max(axis=-1))
        lags.append(times[step] - times[0])
    return np.array(lags), np.array(sups)


def dyadic_holder_seminorm(values: np.ndarray, times: np.ndarray, beta: float):
    """Hölder seminorm over adjacent dyadic pairs; supports batched paths."""
    lags, sups = dyadic_increment_sups(values, times)
    shape = (-1,) + (1,) * (sups.ndim - 1)
    return (sups / lags.reshape(shape) ** beta).max(axis=0)


def cbeta_norm(values: np.ndarray, times: np.ndarray, beta: float):
    """Discrete C^beta norm |X_0| + dyadic-pair seminorm; batched."""
    base = np.linalg.norm(values[..., 0, :], axis=-1)
    return base + dyadic_holder_seminorm(values, times, beta)


def _pairwise_sup(values: np.ndarray, times: np.ndarray, beta: float) -> float:
    """Exact sup over all grid pairs of |X_t - X_s| / |t-s|^beta (O(n^2))."""
    n = values.shape[0] - 1
    best = 0.0
    for lag in range(1, n + 1):
        inc = np.linalg.norm(values[lag:] - values[:-lag], axis=-1)
        best = max(best, inc.max() / (times[lag] - times[0]) ** beta)
    return best


def _dyadic_lag_sups(values: np.ndarray, times: np.ndarray):
    """Sup of |X_t - X_s| over all pairs at each dyadic lag (any offset)."""
    n = values.shape[0] - 1
    lags, sups = [], []
    lag = 1
    while lag <= n:
        inc = np.linalg.norm(values[lag:] - values[:-lag], axis=-1)
        sups.append(float(inc.max()))
        lags.append(times[lag] - times[0])
        lag *= 2
    return np.array(lags), np.array(sups)


def holder_seminorm(path: SamplePath, beta: float, pair_budget: int = 4096,
                    fit_lag_range: tuple[float, float] | None = None) -> HolderEstimate:
    """Discrete Hölder seminorm and fitted lag-scaling exponent.

    Exact over all O(n^2) pairs for n_steps <= 2**11; above that the sup runs
    over every pair at each dyadic lag plus pair_budget random extra pairs
    (chosen by a fixed internal seed so the pair set is reproducible).  The
    fitted exponent is the least-squares slope of log sup-increment against
    log lag over the dyadic lags, optionally restricted to fit_lag_range.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0,1), got {beta}")
    v, t = path.values, path.times
    n = path.grid.n_steps

    if n <= 2 ** 11:
        seminorm = _pairwise_sup(v, t, beta)
    else:
        lags, sups = _dyadic_lag_sups(v, t)
        seminorm = float((sups / lags ** beta).max())
        rng = stream(0x6D6679, n, pair_budget)  # fixed stream: pair set reproducible
        i = rng.integers(0, n + 1, size=pair_budget)
        j = rng.integers(0, n + 1, size=pair_budget)
        keep = i != j
        i, j = i[keep], j[keep]
        inc = np.linalg.norm(v[i] - v[j], axis=-1)
        gap = np.abs(t[i] - t[j]) ** beta
        if inc.size:
            seminorm = max(seminorm, float((inc / gap).max()))

    lags, sups = _dyadic_lag_sups(v, t)
    keep = sups > 0
    if fit_lag_range is not None:
        lo, hi = fit_lag_range
        keep &= (lags >= lo * (1 - 1e-12)) & (lags <= hi * (1 + 1e-12))
    if keep.sum() >= 2:
        slope = float(np.polyfit(np.log(lags[keep]), np.log(sups[keep]), 1)[0])
    else:
        slope = float("nan")
    return HolderEstimate(seminorm=float(seminorm), fitted_exponent=slope,
                          lags_used=lags[keep])


class LocalBoundError(RuntimeError):
    """A window failed the local Hölder hypothesis; carries the window start."""

    def __init__(self, t_start: float, seminorm: float, bound: float):
        super().__init__(
            f"window starting at t={t_start:.6g} has seminorm {seminorm:.6g} > M={bound:.6g}")
        self.t_start = t_start


def local_to_global_check(path: SamplePath, alpha: float, h: float, M: float) -> bool:
    """Check the local-to-global Hölder bound on the grid.

    Re-verifies the hypothesis: every window [t, t+h] must have windowed
    seminorm <= M (raises LocalBoundError naming the first violating window
    otherwise).  Returns True iff the global seminorm is <= M * (1 v 2h^{a-1})
    * T^{1-a}, both sides evaluated exactly on grid pairs.
    """
    v, t = path.values, path.times
    n = path.grid.n_steps
    dt = path.grid.dt
    w = max(1, int(round(h / dt)))
    if abs(w * dt - h) > 1e-9 * path.grid.horizon:
        raise ValueError(f"h={h} is not a whole number of grid steps (dt={dt})")

    tol = 1e-12 * max(1.0, M)
    for start in range(0, n - w + 1):
        sem = _pairwise_sup(v[start:start + w + 1], t[start:start + w + 1], alpha)
        if sem > M + tol:
            raise LocalBoundError(t[start], sem, M)

    global_sem = _pairwise_sup(v, t, alpha)
    T = path.grid.horizon
    bound = M * max(1.0, 2.0 * h ** (alpha - 1.0)) * T ** (1.0 - alpha)
    return global_sem <= bound + tol
