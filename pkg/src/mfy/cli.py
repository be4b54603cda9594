"""Command-line interface.

Exit codes: 0 success, 2 config error, 3 solver non-convergence, 4 blow-up
in a non-demo run.  MFY_SEED in the environment overrides any configured or
flagged seed.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from mfy import io as mfy_io
from mfy import reporting, studies
from mfy.averaging import averaged_field_direct, gamma_norm
from mfy.config import ExperimentConfig, load_config, parse_kernel_spec, save_config
from mfy.kernels import SpatialGrid
from mfy.paths import TimeGrid, gen_noise
from mfy.rng import STREAM_Z
from mfy.solver import BlowUpError, solve_mkv
from mfy.particles import simulate_particles
from mfy.studies import draw_inputs, shared_z

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_BLOWUP = 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfy", description=__doc__)
    p.add_argument("--config", help="TOML experiment config")
    p.add_argument("--seed", type=int, default=None, help="base seed (MFY_SEED wins)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-fbm", help="generate a noise path and write it out")
    g.add_argument("--kind", default="fbm", choices=["fbm", "bm", "zero"])
    g.add_argument("--hurst", type=float, default=0.1)
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--n-steps", type=int, default=1024)
    g.add_argument("--horizon", type=float, default=1.0)
    g.add_argument("--format", default="csv", choices=["csv", "bin"])

    a = sub.add_parser("averaged-field", help="build an averaged field and its norms")
    a.add_argument("--kernel", default="power_law:sigma=-1,eps=0.05")
    a.add_argument("--hurst", type=float, default=0.1)
    a.add_argument("--dim", type=int, default=1)
    a.add_argument("--n-steps", type=int, default=1024)
    a.add_argument("--horizon", type=float, default=1.0)
    a.add_argument("--half-width", type=float, default=4.0)
    a.add_argument("--n-cells", type=int, default=512)
    a.add_argument("--gamma", type=float, default=0.75)

    sub.add_parser("sewing-study", help="sewing-error rate on the benchmark")
    sub.add_parser("solve-mkv", help="Picard fixed point over empirical laws")
    sub.add_parser("particles", help="simulate the N-particle system")
    sub.add_parser("convergence-study", help="mean-field convergence study")
    sub.add_parser("regularisation-demo", help="Z=0 vs Z=fbm blow-up demo")
    sub.add_parser("stability-study", help="stability in law vs input shift")

    b = sub.add_parser("besov-check", help="Littlewood-Paley block diagnostics")
    b.add_argument("--kernel", default="power_law:sigma=-1,eps=0.004")
    b.add_argument("--dim", type=int, default=1)
    b.add_argument("--half-width", type=float, default=16.0)
    b.add_argument("--n-cells", type=int, default=8192)
    b.add_argument("--k-max", type=int, default=8)
    b.add_argument("--p", default="1")
    return p


def _effective_seed(args) -> int | None:
    env = os.environ.get("MFY_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    seed = _effective_seed(args)
    if seed is not None:
        cfg.base_seed = seed
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ValueError, FileNotFoundError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


def _dispatch(args) -> int:
    out = args.out
    os.makedirs(out, exist_ok=True)
    cmd = args.command

    if cmd == "gen-fbm":
        seed = _effective_seed(args) or 0
        grid = TimeGrid(args.horizon, args.n_steps)
        path = gen_noise(args.kind, args.dim, grid, seed,
                         hurst=args.hurst if args.kind == "fbm" else None)
        target = os.path.join(out, f"path.{args.format}")
        (mfy_io.write_path_csv if args.format == "csv" else mfy_io.write_path_bin)(
            target, path)
        print(target)
        return EXIT_OK

    if cmd == "averaged-field":
        seed = _effective_seed(args) or 0
        kernel = parse_kernel_spec(args.kernel, args.dim)
        grid = TimeGrid(args.horizon, args.n_steps)
        sgrid = SpatialGrid(args.half_width, args.n_cells, args.dim)
        Z = gen_noise("fbm", args.dim, grid, (seed, STREAM_Z), hurst=args.hurst)
        G = averaged_field_direct(kernel, Z, sgrid)
        gn = gamma_norm(G, args.gamma)
        mfy_io.write_averaged_field_bin(os.path.join(out, "field.bin"), G)
        mfy_io.write_csv(os.path.join(out, "gamma_norm.csv"),
                         ["gamma", "alpha", "value", "sup_value_rate",
                          "sup_gradient_rate", "lipschitz_rate",
                          "gradient_lipschitz_rate", "fitted_time_exponent"],
                         [(gn.gamma, gn.alpha, gn.value, *gn.components,
                           gn.fitted_time_exponent)])
        from mfy.paths import dyadic_levels
        lags, sups = [], []
        flat = G.cumulative.reshape(G.tgrid.n_steps + 1, -1, G.channels)
        for level, step in dyadic_levels(G.tgrid.n_steps):
            inc = flat[step::step] - flat[:-step:step]
            lags.append(G.tgrid.times[step])
            sups.append(float(np.linalg.norm(inc, axis=-1).max()))
        reporting.gamma_lag_plot(os.path.join(out, "gamma_lags.svg"), lags, sups,
                                 gn.fitted_time_exponent)
        print(os.path.join(out, "field.bin"))
        return EXIT_OK

    if cmd == "besov-check":
        kernel = parse_kernel_spec(args.kernel, args.dim)
        sgrid = SpatialGrid(args.half_width, args.n_cells, args.dim)
        p = float("inf") if args.p in ("inf", "oo") else int(args.p)
        studies.run_besov_check(kernel, sgrid, args.k_max, out, p=p)
        print(os.path.join(out, "besov.csv"))
        return EXIT_OK

    cfg = _load(args)
    save_config(cfg, os.path.join(out, "config.toml"))

    if cmd == "sewing-study":
        summary = studies.run_sewing_study(cfg, out)
        print(f"germ slope {summary.germ_slope:.4f}")
        return EXIT_OK

    if cmd == "solve-mkv":
        grid = TimeGrid(cfg.horizon, cfg.n_steps)
        Z = shared_z(cfg, grid)
        G = averaged_field_direct(cfg.make_kernel(), Z, cfg.make_sgrid())
        xs, bs = draw_inputs(cfg, grid, cfg.m_stability, 0)
        res = solve_mkv(G, list(zip(xs, bs)), cfg.solve)
        mfy_io.write_csv(os.path.join(out, "picard_gaps.csv"), ["iteration", "gap"],
                         list(enumerate(res.gaps, start=1)))
        np.save(os.path.join(out, "flow.npy"), res.flow.values)
        from mfy.solver import growth_check
        from mfy.paths import SamplePath as SP
        rep = growth_check(SP(grid, res.flow.values[0]), res.flow, bs[0], G, cfg.solve)
        mfy_io.write_csv(os.path.join(out, "growth.csv"),
                         ["y_seminorm", "mu_seminorm", "b_seminorm",
                          "gamma_norm", "ratio", "bar_h"],
                         [(rep.y_seminorm, rep.mu_seminorm, rep.b_seminorm,
                           rep.gamma_norm_value, rep.ratio, rep.bar_h)])
        if not res.converged:
            print("solver did not converge", file=sys.stderr)
            return EXIT_NONCONVERGED
        print(os.path.join(out, "flow.npy"))
        return EXIT_OK

    if cmd == "particles":
        grid = TimeGrid(cfg.horizon, cfg.n_steps)
        Z = shared_z(cfg, grid)
        G = averaged_field_direct(cfg.make_kernel(), Z, cfg.make_sgrid())
        n = cfg.n_list[0] if cfg.n_list else 64
        seed0 = cfg.seeds[0] if cfg.seeds else 0
        xs, bs = draw_inputs(cfg, grid, n, seed0)
        flow = simulate_particles(G, xs, bs, cfg.solve)
        np.save(os.path.join(out, "atoms.npy"), flow.values)
        checks = studies._checkpoints(cfg.n_steps)
        rows = [(grid.times[k], float(flow.values[:, k, 0].mean()),
                 float(flow.values[:, k, 0].std())) for k in checks]
        mfy_io.write_csv(os.path.join(out, "marginals.csv"),
                         ["t", "mean_x1", "std_x1"], rows)
        print(os.path.join(out, "atoms.npy"))
        return EXIT_OK

    if cmd == "convergence-study":
        summary = studies.run_convergence_study(cfg, out, threads=args.threads)
        if not summary.reference_converged:
            print("reference solve did not converge", file=sys.stderr)
            return EXIT_NONCONVERGED
        print(os.path.join(out, "convergence.csv"))
        return EXIT_OK

    if cmd == "regularisation-demo":
        studies.run_regularisation_demo(cfg, out)
        print(os.path.join(out, "regularisation.csv"))
        return EXIT_OK

    if cmd == "stability-study":
        summary = studies.run_stability_study(cfg, out)
        print(os.path.join(out, "stability.csv"))
        return EXIT_OK

    raise ValueError(f"unknown command {cmd!r}")


if __name__ == "__main__":
    sys.exit(main())
