"""The regularised N-particle system and its shift to physical coordinates.

The coupled one-step scheme advances every particle against the empirical
measure of the current state, so no Picard iteration is needed; by the Tanaka
identification this is the McKean-Vlasov problem on the finite uniform
probability space, and solve_mkv on the same atoms must reproduce it.
"""

from __future__ import annotations

import numpy as np

from mfy.averaging import AveragedField, interp_values
from mfy.nlyi import EmpiricalMeasureFlow, _canonical_order, _binned_drift_field, PAIRWISE_ATOM_CAP
from mfy.solver import SolveConfig, BlowUpError


def _pairwise_drift(G: AveragedField, k: int, state: np.ndarray,
                    include_self: bool) -> np.ndarray:
    """(1/N) sum_j G_{k,k+1}(Y_i - Y_j) for all i, in canonical atom order."""
    n = state.shape[0]
    order = _canonical_order(state)
    sorted_state = state[order]
    diffs = sorted_state[:, None, :] - sorted_state[None, :, :]
    vals = G.eval_increment(k, k + 1, diffs.reshape(-1, state.shape[1]))
    vals = vals.reshape(n, n, -1)
    total = vals.sum(axis=1)
    if include_self:
        drift_sorted = total / n
    else:
        if n == 1:
            return np.zeros((1, vals.shape[-1]))
        self_term = vals[np.arange(n), np.arange(n)]
        drift_sorted = (total - self_term) / (n - 1)
    drift = np.empty_like(drift_sorted)
    drift[order] = drift_sorted
    return drift


def simulate_particles(G: AveragedField, x: np.ndarray, B, cfg: SolveConfig,
                       include_self: bool = True, method: str = "auto",
                       on_blowup: str = "raise"):
    """Simulate the coupled N-particle system driven by an averaged field.

    x: (N, d) initial positions; B: list of N SamplePaths (or an
    (N, n_t+1, d) array) of idiosyncratic noises on the field's time grid.
    include_self keeps the j = i term of the interaction sum (the empirical
    McKean-Vlasov convention); disable it for the j != i variant.  The
    pairwise O(N^2) route is exact; "binned" snaps the empirical measure to
    the grid and is the fast path for N above the atom cap.

    Returns an EmpiricalMeasureFlow; on_blowup="stop" freezes the state at
    the guard trip instead of raising and returns (flow, trip_time).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if hasattr(B, "shape"):
        bvals = np.asarray(B, dtype=float)
        grid = G.tgrid
    else:
        B = list(B)
        grid = B[0].grid
        bvals = np.stack([p.values for p in B])
    if bvals.shape[1] != G.tgrid.n_steps + 1:
        raise ValueError("noise paths do not match the field time grid")
    if x.shape[0] != bvals.shape[0]:
        raise ValueError("need one noise path per particle")
    n, d = x.shape
    if method == "auto":
        method = "pairwise" if n <= PAIRWISE_ATOM_CAP else "binned"
    if method == "binned" and not include_self:
        raise ValueError("the binned fast path only implements the full (j = i included) sum")

    n_t = G.tgrid.n_steps
    guard = 10.0 * G.sgrid.half_width
    dB = np.diff(bvals, axis=1)
    out = np.empty((n, n_t + 1, d))
    out[:, 0, :] = x
    cur = x
    trip = None
    for k in range(n_t):
        if method == "pairwise":
            drift = _pairwise_drift(G, k, cur, include_self)
        else:
            fld = _binned_drift_field(G, cur, k, k + 1)
            drift = interp_values(fld, G.sgrid, cur, G.clamp)
        cur = cur + drift + dB[:, k, :]
        out[:, k + 1, :] = cur
        mags = np.linalg.norm(cur, axis=-1)
        if mags.max() > guard:
            t_trip = G.tgrid.times[k + 1]
            if on_blowup == "raise":
                raise BlowUpError(t_trip, int(mags.argmax()), float(mags.max()))
            out[:, k + 2:, :] = cur[:, None, :]
            trip = float(t_trip)
            break
    flow = EmpiricalMeasureFlow(G.tgrid, out)
    return (flow, trip) if on_blowup == "stop" else flow


def shifted_system(Y: EmpiricalMeasureFlow, Z) -> EmpiricalMeasureFlow:
    """Shift every atom by the common path Z: X^i = Y^i + Z.

    The round trip with -Z is bit-exact whenever the sums are exactly
    representable (grid-friendly values); see the tests.
    """
    zvals = Z.values if hasattr(Z, "values") else np.asarray(Z, dtype=float)
    if zvals.ndim == 1:
        zvals = zvals[:, None]
    if zvals.shape[0] != Y.grid.n_steps + 1:
        raise ValueError("grid mismatch between flow and shift path")
    if zvals.shape[1] != Y.dim:
        raise ValueError("dimension mismatch between flow and shift path")
    return EmpiricalMeasureFlow(Y.grid, Y.values + zvals[None, :, :])
