"""Figure rendering for study reports: SVG files next to the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "mfy"  # deterministic ids in SVG output

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def convergence_plot(path, n_values, medians, per_seed=None):
    """log-log plot of sup-marginal W1 against N with an N^{-1/2} guide."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    n_values = np.asarray(n_values, dtype=float)
    medians = np.asarray(medians, dtype=float)
    if per_seed is not None:
        for n, vals in per_seed.items():
            ax.loglog([n] * len(vals), vals, ".", color="0.7", ms=4)
    ax.loglog(n_values, medians, "o-", color="C0", label="median sup-marginal $W_1$")
    guide = medians[0] * (n_values / n_values[0]) ** -0.5
    ax.loglog(n_values, guide, "--", color="0.4", label=r"$N^{-1/2}$ guide")
    ax.set_xlabel("N")
    ax.set_ylabel(r"$\sup_t W_1$ to reference")
    ax.legend(frameon=False)
    _finish(fig, path)


def stability_plot(path, input_dists, output_dists, slope):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    keep = np.asarray(input_dists) > 0
    x = np.asarray(input_dists)[keep]
    y = np.asarray(output_dists)[keep]
    ax.loglog(x, y, "o-", color="C0")
    ax.set_xlabel("input $W_1$ distance")
    ax.set_ylabel("output $W_1$ distance")
    ax.set_title(f"fitted slope {slope:.3f}")
    _finish(fig, path)


def sewing_plot(path, window_sizes, errors, slope):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.loglog(window_sizes, errors, "o-", color="C0", label="germ error")
    ax.set_xlabel("window size")
    ax.set_ylabel(r"$\max_w\,|I_{\rm ref} - \Xi_w|$")
    ax.set_title(f"fitted exponent {slope:.3f}")
    ax.legend(frameon=False)
    _finish(fig, path)


def gamma_lag_plot(path, lags, sups, fitted):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.loglog(lags, sups, "o-", color="C0")
    ax.set_xlabel("time lag")
    ax.set_ylabel(r"$\sup_x |\Gamma_{s,t}(x)|$")
    ax.set_title(f"fitted time exponent {fitted:.3f}")
    _finish(fig, path)


def besov_plot(path, ks, norms, scaled):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    ax1.semilogy(ks, norms, "o-", color="C0")
    ax1.set_xlabel("block k")
    ax1.set_ylabel(r"$\|\Delta_k K\|_{L^1}$")
    ax2.semilogy(ks, scaled, "s-", color="C1")
    ax2.set_xlabel("block k")
    ax2.set_ylabel(r"$2^{(\sigma+d)k}\,\|\Delta_k K\|_{L^1}$")
    _finish(fig, path)


def demo_plot(path, times, flows_by_label):
    fig, axes = plt.subplots(1, len(flows_by_label), figsize=(4.4 * len(flows_by_label), 3.4),
                             squeeze=False)
    for ax, (label, values) in zip(axes[0], flows_by_label.items()):
        for atom in values[:, :, 0]:
            ax.plot(times, atom, lw=0.8)
        ax.set_title(label)
        ax.set_xlabel("t")
    _finish(fig, path)
