"""The headline studies: mean-field convergence, regularisation, stability.

Each study writes delimited CSV output (17-significant-digit floats, byte
reproducible for a fixed config and seed) together with SVG figures, and
returns a summary object that the tests assert against.  The regularising
path Z is sampled once per experiment and shared by every particle count and
by the reference solve.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from mfy import reporting
from mfy.averaging import averaged_field_direct, gamma_norm
from mfy.config import ExperimentConfig
from mfy.io import write_csv, write_averaged_field_bin, write_path_bin
from mfy.kernels import Kernel, SpatialGrid, besov_block_norms, evaluate_on_grid
from mfy.metrics import marginal_w1, w1_1d, w2_1d, path_w1
from mfy.nlyi import EmpiricalMeasureFlow, sewing_rate
from mfy.paths import SamplePath, TimeGrid, gen_noise
from mfy.rng import STREAM_PARTICLES, STREAM_REFERENCE, STREAM_STUDY, STREAM_Z, stream
from mfy.particles import simulate_particles
from mfy.solver import SolveConfig, solve_mkv

CHECK_LEVEL = 6


def _checkpoints(n_steps: int, level: int = CHECK_LEVEL) -> np.ndarray:
    lvl = min(level, int(round(math.log2(n_steps))))
    return np.arange(0, n_steps + 1, n_steps >> lvl)


def draw_inputs(cfg: ExperimentConfig, grid: TimeGrid, n: int, *tag):
    """n i.i.d. inputs (x_i, B_i); particle i depends only on (base_seed, tag, i)."""
    xs = np.empty((n, cfg.dim))
    paths = []
    for i in range(n):
        key = (cfg.base_seed, *tag, i)
        xs[i] = stream(*key, 0).standard_normal(cfg.dim) * cfg.x_std
        if cfg.noise_kind == "zero" or cfg.noise_scale == 0.0:
            b = gen_noise("zero", cfg.dim, grid, 0)
        else:
            b = gen_noise(cfg.noise_kind, cfg.dim, grid, (*key, 1), hurst=cfg.hurst
                          if cfg.noise_kind == "fbm" else None)
            if cfg.noise_scale != 1.0:
                b = SamplePath(grid, b.values * cfg.noise_scale, kind=b.kind)
        paths.append(b)
    return xs, paths


def shared_z(cfg: ExperimentConfig, grid: TimeGrid) -> SamplePath:
    return gen_noise("fbm", cfg.dim, grid, (cfg.base_seed, STREAM_Z), hurst=cfg.hurst)


def _sup_marginal_w1(a: np.ndarray, b: np.ndarray, checks, seed: int = 0) -> float:
    return max(marginal_w1(a[:, k, :], b[:, k, :], seed=seed) for k in checks)


def _sup_marginal_w2_1d(a: np.ndarray, b: np.ndarray, checks) -> float:
    return max(w2_1d(a[:, k, 0], b[:, k, 0]) for k in checks)


@dataclass
class ConvergenceSummary:
    n_list: list
    medians: dict
    rows: list
    reference_converged: bool


def run_convergence_study(cfg: ExperimentConfig, out_dir, threads: int = 1) -> ConvergenceSummary:
    """Mean-field convergence: N-particle systems against a large-M reference.

    Emits convergence.csv with one row per (N, seed) and a log-log SVG of the
    median sup-marginal W1 against N.
    """
    os.makedirs(out_dir, exist_ok=True)
    grid = TimeGrid(cfg.horizon, cfg.n_steps)
    kernel = cfg.make_kernel()
    sgrid = cfg.make_sgrid()
    Z = shared_z(cfg, grid)
    G = averaged_field_direct(kernel, Z, sgrid)
    checks = _checkpoints(cfg.n_steps)

    xs_ref, bs_ref = draw_inputs(cfg, grid, cfg.m_reference, STREAM_REFERENCE)
    ref = solve_mkv(G, list(zip(xs_ref, bs_ref)), cfg.solve)
    ref_vals = ref.flow.values
    ref_b = np.stack([p.values for p in bs_ref])
    cap = 512

    def one_row(args):
        n, seed = args
        xs, bs = draw_inputs(cfg, grid, n, STREAM_PARTICLES, seed)
        flow = simulate_particles(G, xs, bs, cfg.solve)
        sup_w1 = _sup_marginal_w1(flow.values, ref_vals, checks, seed=cfg.base_seed)
        pw1 = path_w1(
            EmpiricalMeasureFlow(grid, flow.values[:min(n, cap)]),
            EmpiricalMeasureFlow(grid, ref_vals[:min(cfg.m_reference, cap)]),
            cfg.solve.beta)
        in_x = marginal_w1(xs, xs_ref, seed=cfg.base_seed)
        b_vals = np.stack([p.values for p in bs])
        in_b = (_sup_marginal_w2_1d(b_vals, ref_b, checks) if cfg.dim == 1 else
                float("nan"))
        return (n, seed, sup_w1, pw1, in_x, in_b, int(ref.converged))

    jobs = [(n, seed) for n in cfg.n_list for seed in cfg.seeds]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one_row, jobs))
    else:
        rows = [one_row(j) for j in jobs]
    rows.sort(key=lambda r: (r[0], r[1]))

    write_csv(os.path.join(out_dir, "convergence.csv"),
              ["N", "seed", "sup_marginal_w1", "path_w1", "input_w1_x",
               "input_w2_B", "reference_converged"], rows)
    medians = {}
    per_seed = {}
    for n in cfg.n_list:
        vals = [r[2] for r in rows if r[0] == n]
        medians[n] = float(np.median(vals))
        per_seed[n] = vals
    reporting.convergence_plot(os.path.join(out_dir, "convergence.svg"),
                               cfg.n_list, [medians[n] for n in cfg.n_list], per_seed)
    return ConvergenceSummary(n_list=list(cfg.n_list), medians=medians, rows=rows,
                              reference_converged=ref.converged)


@dataclass
class DemoRun:
    label: str
    guard_tripped: bool
    trip_time: float
    max_drift: float
    min_shifted_distance: float


@dataclass
class DemoSummary:
    zero_run: DemoRun
    fbm_runs: list


def _cluster_inputs(cfg: ExperimentConfig, grid: TimeGrid):
    """Near-collision initial data: a tight cluster at the kernel's strong zone."""
    spacing = cfg.cluster_spacing or 0.8 * cfg.kernel.get("epsilon", 0.01)
    n = cfg.n_particles
    offsets = (np.arange(n) - (n - 1) / 2.0) * spacing
    xs = np.zeros((n, cfg.dim))
    xs[:, 0] = offsets
    bs = np.zeros((n, grid.n_steps + 1, cfg.dim))
    return xs, bs


def _demo_run(label, G, Z, xs, bs, cfg) -> DemoRun:
    flow, trip = simulate_particles(G, xs, bs, cfg.solve, on_blowup="stop")
    vals = flow.values
    drift = np.diff(vals, axis=1) - np.diff(bs, axis=1)
    max_drift = float(np.linalg.norm(drift, axis=-1).max())
    kup = vals.shape[1] if trip is None else G.tgrid.index_of(trip) + 1
    diffs = vals[:, None, :kup, :] - vals[None, :, :kup, :]
    shifted = diffs + Z.values[None, None, :kup, :]
    mags = np.linalg.norm(shifted, axis=-1)
    n = vals.shape[0]
    off = ~np.eye(n, dtype=bool)
    min_shift = float(mags[off].min()) if n > 1 else float("inf")
    return DemoRun(label=label, guard_tripped=trip is not None,
                   trip_time=trip if trip is not None else float("nan"),
                   max_drift=max_drift, min_shifted_distance=min_shift)


def run_regularisation_demo(cfg: ExperimentConfig, out_dir) -> DemoSummary:
    """Singular-kernel near-collision demo: Z = 0 against Z = fbm(H).

    Blow-ups are the point here: guard trips are recorded per run, never
    fatal.  Reports the max one-step drift magnitude and the min pairwise
    shifted distance min_{i != j, t} |Y_i - Y_j + Z_t| for each run.
    """
    os.makedirs(out_dir, exist_ok=True)
    grid = TimeGrid(cfg.horizon, cfg.n_steps)
    kernel = cfg.make_kernel()
    sgrid = cfg.make_sgrid()
    xs, bs = _cluster_inputs(cfg, grid)

    z0 = gen_noise("zero", cfg.dim, grid, 0)
    G0 = averaged_field_direct(kernel, z0, sgrid)
    zero_run = _demo_run("Z=zero", G0, z0, xs, bs, cfg)

    fbm_runs = []
    flows = {}
    for seed in cfg.seeds:
        Z = gen_noise("fbm", cfg.dim, grid, (cfg.base_seed, STREAM_Z, seed),
                      hurst=cfg.hurst)
        G = averaged_field_direct(kernel, Z, sgrid)
        run = _demo_run(f"Z=fbm seed={seed}", G, Z, xs, bs, cfg)
        fbm_runs.append(run)
        if not flows:
            flow, _ = simulate_particles(G, xs, bs, cfg.solve, on_blowup="stop")
            flows[f"Z=fbm(H={cfg.hurst})"] = flow.values

    rows = [(r.label, int(r.guard_tripped), r.trip_time, r.max_drift,
             r.min_shifted_distance) for r in [zero_run] + fbm_runs]
    write_csv(os.path.join(out_dir, "regularisation.csv"),
              ["run", "guard_tripped", "trip_time", "max_drift",
               "min_shifted_distance"], rows)

    flow0, _ = simulate_particles(G0, xs, bs, cfg.solve, on_blowup="stop")
    flows = {"Z=0": flow0.values, **flows}
    reporting.demo_plot(os.path.join(out_dir, "regularisation.svg"), grid.times, flows)
    return DemoSummary(zero_run=zero_run, fbm_runs=fbm_runs)


@dataclass
class StabilitySummary:
    rows: list
    slopes: dict  # resolution -> fitted slope


def run_stability_study(cfg: ExperimentConfig, out_dir) -> StabilitySummary:
    """Stability in law: output distance against input perturbation size.

    Perturbs the inputs by a shift delta in x and/or a ramp delta * t in B,
    solves both fixed points and reports output sup-marginal W1 against the
    measured input distance, with the log-log slope per grid resolution.
    """
    os.makedirs(out_dir, exist_ok=True)
    kernel = cfg.make_kernel()
    sgrid = cfg.make_sgrid()
    resolutions = list(cfg.resolutions) or [cfg.n_steps // 2, cfg.n_steps]

    rows = []
    slopes = {}
    for n_steps in resolutions:
        grid = TimeGrid(cfg.horizon, n_steps)
        Z = shared_z(cfg, grid)
        G = averaged_field_direct(kernel, Z, sgrid)
        checks = _checkpoints(n_steps)
        xs, bs = draw_inputs(cfg, grid, cfg.m_stability, STREAM_STUDY)
        base = solve_mkv(G, list(zip(xs, bs)), cfg.solve)
        shift_dir = np.zeros(cfg.dim)
        shift_dir[0] = 1.0
        for delta in cfg.deltas:
            xs2 = xs + delta * shift_dir if cfg.shift_x else xs
            if cfg.shift_b and delta != 0.0:
                ramp = (grid.times / cfg.horizon)[:, None] * delta * shift_dir
                bs2 = [SamplePath(grid, b.values + ramp, kind=b.kind) for b in bs]
            else:
                bs2 = bs
            pert = solve_mkv(G, list(zip(xs2, bs2)), cfg.solve)
            in_x = marginal_w1(xs, xs2, seed=cfg.base_seed) if cfg.shift_x else 0.0
            in_b = (delta if cfg.shift_b else 0.0)
            out_d = _sup_marginal_w1(base.flow.values, pert.flow.values, checks,
                                     seed=cfg.base_seed)
            rows.append((n_steps, delta, in_x + in_b, out_d,
                         int(base.converged and pert.converged)))
        pts = [(r[2], r[3]) for r in rows if r[0] == n_steps and r[2] > 0 and r[3] > 0]
        if len(pts) >= 2:
            lx, ly = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
            slopes[n_steps] = float(np.polyfit(lx, ly, 1)[0])
        else:
            slopes[n_steps] = float("nan")

    write_csv(os.path.join(out_dir, "stability.csv"),
              ["n_steps", "delta", "input_dist", "output_dist", "converged"], rows)
    fine = resolutions[-1]
    pts = [(r[2], r[3]) for r in rows if r[0] == fine and r[2] > 0 and r[3] > 0]
    reporting.stability_plot(os.path.join(out_dir, "stability.svg"),
                             [p[0] for p in pts], [p[1] for p in pts], slopes[fine])
    return StabilitySummary(rows=rows, slopes=slopes)


@dataclass
class SewingSummary:
    germ_slope: float
    refine_slope: float
    window_sizes: np.ndarray
    germ_errors: np.ndarray


def run_sewing_study(cfg: ExperimentConfig, out_dir, levels=range(3, 10),
                     ref_level: int = 12, n_atoms: int = 32) -> SewingSummary:
    """Sewing-error rate study on a solved benchmark system."""
    os.makedirs(out_dir, exist_ok=True)
    grid = TimeGrid(cfg.horizon, cfg.n_steps)
    kernel = cfg.make_kernel()
    sgrid = cfg.make_sgrid()
    Z = shared_z(cfg, grid)
    G = averaged_field_direct(kernel, Z, sgrid)
    xs, bs = draw_inputs(cfg, grid, n_atoms, STREAM_STUDY)
    res = solve_mkv(G, list(zip(xs, bs)), cfg.solve)
    Y = SamplePath(grid, res.flow.values[0])
    rep = sewing_rate(G, Y, res.flow, 0.0, cfg.horizon, levels=levels,
                      ref_level=ref_level)
    write_csv(os.path.join(out_dir, "sewing.csv"), ["window_size", "germ_error"],
              list(zip(rep.window_sizes, rep.germ_errors)))
    reporting.sewing_plot(os.path.join(out_dir, "sewing.svg"), rep.window_sizes,
                          rep.germ_errors, rep.germ_slope)
    return SewingSummary(germ_slope=rep.germ_slope, refine_slope=rep.refine_slope,
                         window_sizes=rep.window_sizes, germ_errors=rep.germ_errors)


@dataclass
class BesovSummary:
    block_norms: np.ndarray
    scaled: np.ndarray
    spread: float


def run_besov_check(kernel: Kernel, sgrid: SpatialGrid, k_max: int, out_dir,
                    p=1) -> BesovSummary:
    """Block norms of a kernel plus the homogeneous scaling constants."""
    os.makedirs(out_dir, exist_ok=True)
    fld = evaluate_on_grid(kernel, sgrid)
    norms = besov_block_norms(fld, p, k_max)
    ks = np.arange(-1, k_max + 1)
    scaled = 2.0 ** ((kernel.sigma + sgrid.dim) * np.maximum(ks, 0)) * norms
    mid = (ks >= 2) & (ks <= k_max - 2)
    vals = scaled[mid]
    spread = float(vals.max() / vals.min()) if vals.size and vals.min() > 0 else float("inf")
    write_csv(os.path.join(out_dir, "besov.csv"), ["k", "block_norm", "scaled"],
              list(zip(ks, norms, scaled)))
    reporting.besov_plot(os.path.join(out_dir, "besov.svg"), ks, norms, scaled)
    return BesovSummary(block_norms=norms, scaled=scaled, spread=spread)
