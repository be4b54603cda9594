"""Wasserstein distances between empirical measures, marginal and path-space.

w1_1d is exact for one-dimensional samples (quantile-function integral, which
for unequal sizes equals replication to the least common multiple).  Exact
small-instance transport goes through scipy's assignment solver.  Path-space
distances use the discrete C^beta norm |f_0| + dyadic-pair Hölder seminorm.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from mfy.paths import cbeta_norm, dyadic_levels
from mfy.rng import stream


def _quantile_merge(a: np.ndarray, b: np.ndarray, power: float) -> float:
    """integral of |F_a^{-1}(q) - F_b^{-1}(q)|^power dq for sorted samples."""
    m, n = len(a), len(b)
    qa = np.arange(1, m + 1) / m
    qb = np.arange(1, n + 1) / n
    q = np.union1d(qa, qb)
    widths = np.diff(np.concatenate([[0.0], q]))
    ia = np.minimum((np.ceil(q * m - 1e-12) - 1).astype(int), m - 1)
    ib = np.minimum((np.ceil(q * n - 1e-12) - 1).astype(int), n - 1)
    return float(np.sum(widths * np.abs(a[ia] - b[ib]) ** power))


def w1_1d(a, b) -> float:
    """Exact 1-Wasserstein distance between 1d empirical samples.

    Equal sizes reduce to the mean absolute difference of sorted samples;
    unequal sizes are handled by the quantile-function integral, equivalent to
    replicating each set to the least common multiple of the sizes.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample set")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    return _quantile_merge(a, b, 1.0)


def w2_1d(a, b) -> float:
    """Quadratic-cost counterpart of w1_1d (exact in 1d)."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample set")
    if a.size == b.size:
        return math.sqrt(float(np.mean((a - b) ** 2)))
    return math.sqrt(_quantile_merge(a, b, 2.0))


MAX_EXACT = 512


def _replicate_to_common(a: np.ndarray, b: np.ndarray):
    na, nb = a.shape[0], b.shape[0]
    if na == nb:
        return a, b
    m = na * nb // math.gcd(na, nb)
    if m > MAX_EXACT:
        raise ValueError(f"replicated size {m} exceeds the exact-transport cap {MAX_EXACT}")
    return np.repeat(a, m // na, axis=0), np.repeat(b, m // nb, axis=0)


def w1_exact_small(a, b, metric=None) -> float:
    """Optimal-assignment W1 between small empirical measures.

    a, b: (N, d) point clouds or sequences of objects consumed by `metric`.
    metric defaults to the Euclidean distance.  Unequal atom counts are
    replicated to the least common multiple; sizes are capped at 512.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    a, b = _replicate_to_common(a, b)
    n = a.shape[0]
    if n > MAX_EXACT:
        raise ValueError(f"size {n} exceeds the exact-transport cap {MAX_EXACT}")
    if metric is None:
        cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    else:
        cost = np.array([[metric(x, y) for y in b] for x in a])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / n)


def sliced_w1(a, b, n_proj: int = 128, seed: int = 0,
              directions: np.ndarray | None = None) -> float:
    """Average of exact 1d W1 over random projection directions (d >= 2).

    Deterministic per seed; pass explicit unit `directions` to share them
    across calls (e.g. to check rotation invariance with matched directions).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a.shape[1]
    if d < 2:
        raise ValueError("sliced_w1 requires d >= 2; use w1_1d in d=1")
    if directions is None:
        rng = stream(seed, 0x736C)
        directions = rng.standard_normal((n_proj, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    total = 0.0
    for u in directions:
        total += w1_1d(a @ u, b @ u)
    return total / len(directions)


def marginal_w1(a, b, seed: int = 0, n_proj: int = 128) -> float:
    """w1_1d in d=1, sliced_w1 otherwise; the workhorse marginal distance."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1 or a.shape[1] == 1:
        return w1_1d(a, b)
    return sliced_w1(a, b, n_proj=n_proj, seed=seed)


# ---------------------------------------------------------------------------
# Path-space distances and measure-flow seminorms
# ---------------------------------------------------------------------------

def path_w1(A, B, beta: float, power: float = 1.0) -> float:
    """Assignment W1 between empirical path laws under the discrete C^beta norm.

    A, B: EmpiricalMeasureFlow (or (N, n_t+1, d) arrays on a shared grid).
    power=2 gives the squared-cost (W2) variant used for noise marginals.
    Atom counts are capped at 512.
    """
    va, ta = _flow_values(A)
    vb, tb = _flow_values(B)
    if va.shape[1:] != vb.shape[1:] or not np.allclose(ta, tb):
        raise ValueError("flows must share grid and dimension")
    va, vb = _replicate_to_common(va, vb)
    n = va.shape[0]
    if n > MAX_EXACT:
        raise ValueError(f"atom count {n} exceeds the exact-transport cap {MAX_EXACT}")
    cost = np.empty((n, n))
    for i in range(n):
        cost[i] = cbeta_norm(va[i][None, ...] - vb, ta, beta) ** power
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum() / n)
    return total if power == 1.0 else total ** (1.0 / power)


def _flow_values(A):
    if hasattr(A, "values") and hasattr(A, "grid"):
        return A.values, A.grid.times
    raise TypeError("expected an EmpiricalMeasureFlow")


def lipstar_1d(positions, weights) -> float:
    """Lipschitz-dual norm of a zero-mass signed measure on the line.

    Exact via the CDF identity ||rho||_lip* = integral |F_rho|; this is the
    transport cost between the positive and negative parts.
    """
    positions = np.asarray(positions, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if abs(weights.sum()) > 1e-9 * max(1.0, np.abs(weights).sum()):
        raise ValueError("lip* norm needs zero total mass")
    order = np.argsort(positions, kind="stable")
    p, w = positions[order], weights[order]
    F = np.cumsum(w)[:-1]
    return float(np.sum(np.abs(F) * np.diff(p)))


def signed_lipstar(positions: np.ndarray, weights: np.ndarray,
                   directions: np.ndarray | None = None, seed: int = 0,
                   n_proj: int = 128) -> float:
    """lip* norm of a zero-mass atomic signed measure; exact in d=1, sliced in d>=2."""
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions[:, None]
    if positions.shape[1] == 1:
        return lipstar_1d(positions[:, 0], weights)
    if directions is None:
        rng = stream(seed, 0x736C)
        directions = rng.standard_normal((n_proj, positions.shape[1]))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return float(np.mean([lipstar_1d(positions @ u, weights) for u in directions]))


def signed_marginal_lipstar(xs_plus, xs_minus, seed: int = 0, n_proj: int = 128,
                            directions: np.ndarray | None = None) -> float:
    """lip* norm of (emp(xs_plus) - emp(xs_minus)); exact in d=1, sliced in d>=2."""
    xp = np.asarray(xs_plus, dtype=float)
    xm = np.asarray(xs_minus, dtype=float)
    if xp.ndim == 1:
        xp = xp[:, None]
    if xm.ndim == 1:
        xm = xm[:, None]
    pos = np.concatenate([xp, xm])
    w = np.concatenate([np.full(xp.shape[0], 1.0 / xp.shape[0]),
                        np.full(xm.shape[0], -1.0 / xm.shape[0])])
    return signed_lipstar(pos, w, directions=directions, seed=seed, n_proj=n_proj)


def flow_holder_seminorm(mu, beta: float, seed: int = 0):
    """Hölder seminorm of a measure flow over dyadic pairs, in the W1 metric.

    [mu]_beta = sup over adjacent dyadic (s, t) of W1(mu_t, mu_s) / |t-s|^beta
    (KR duality identifies the lip* norm of mu_t - mu_s with W1).  Also fits
    the lag-scaling exponent of the per-level sup.
    """
    from mfy.paths import HolderEstimate
    vals, times = _flow_values(mu)
    n = vals.shape[1] - 1
    lags, sups = [], []
    seminorm = 0.0
    for level, step in dyadic_levels(n):
        lag = times[step] - times[0]
        best = 0.0
        for j in range(0, n, step):
            best = max(best, marginal_w1(vals[:, j + step], vals[:, j], seed=seed))
        lags.append(lag)
        sups.append(best)
        seminorm = max(seminorm, best / lag ** beta)
    lags, sups = np.array(lags), np.array(sups)
    keep = sups > 0
    slope = (float(np.polyfit(np.log(lags[keep]), np.log(sups[keep]), 1)[0])
             if keep.sum() >= 2 else float("nan"))
    return HolderEstimate(seminorm=float(seminorm), fitted_exponent=slope, lags_used=lags[keep])


def flow_difference_seminorm(A, B, beta: float, seed: int = 0,
                             i0: int | None = None, i1: int | None = None) -> float:
    """[mu - nu]_beta: dyadic-pair seminorm of the signed difference flow.

    Uses the exact CDF identity in d=1 and a common-direction sliced dual in
    d >= 2, over the dyadic pair set of the (sub)window [i0, i1].
    """
    va, ta = _flow_values(A)
    vb, _ = _flow_values(B)
    i0 = 0 if i0 is None else i0
    i1 = va.shape[1] - 1 if i1 is None else i1
    span = i1 - i0
    if span <= 0:
        return 0.0
    d = va.shape[2]
    directions = None
    if d >= 2:
        rng = stream(seed, 0x736C)
        directions = rng.standard_normal((128, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    na, nb = va.shape[0], vb.shape[0]
    weights = np.concatenate([np.full(na, 1.0 / na), np.full(nb, -1.0 / nb),
                              np.full(na, -1.0 / na), np.full(nb, 1.0 / nb)])
    best = 0.0
    for level, step in dyadic_levels(span):
        lag = ta[i0 + step] - ta[i0]
        for j in range(i0, i1, step):
            pos = np.concatenate([va[:, j + step], vb[:, j + step], va[:, j], vb[:, j]])
            val = signed_lipstar(pos, weights, directions=directions)
            best = max(best, val / lag ** beta)
    return best


def flow_distance(A, B, beta: float, seed: int = 0,
                  i0: int | None = None, i1: int | None = None) -> float:
    """The Hölder-flow metric: ||mu_s0 - nu_s0||_lip* + [mu - nu]_beta."""
    va, _ = _flow_values(A)
    vb, _ = _flow_values(B)
    i0_ = 0 if i0 is None else i0
    base = signed_marginal_lipstar(va[:, i0_], vb[:, i0_], seed=seed)
    return base + flow_difference_seminorm(A, B, beta, seed=seed, i0=i0, i1=i1)
