"""Diagnostic figure rendering for CLI reports.

Figures are a convenience layer over the delimited outputs: every plot is
derived from data that is also written as CSV/JSON, so disabling plotting
never loses information.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid import RealField


def plot_field(field: RealField, path, title: str = "") -> None:
    g = field.grid
    fig, ax = plt.subplots(figsize=(5, 3.4))
    if g.dim == 1:
        ax.plot(g.coords(), field.values, lw=1.2)
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    else:
        im = ax.imshow(
            field.values.T,
            origin="lower",
            extent=(0, 1, 0, 1),
            cmap="RdBu_r",
        )
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_bench(rows, path) -> None:
    """Wall time against N on log-log axes, one line per method."""
    methods = sorted({r["method"] for r in rows})
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for method in methods:
        pts = sorted(
            (r["N"], r["wallTimeSeconds"]) for r in rows if r["method"] == method
        )
        ax.loglog([p[0] for p in pts], [p[1] for p in pts], "o-", label=method)
    ax.set_xlabel("N")
    ax.set_ylabel("wall time [s]")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_convergence(log_rows, path) -> None:
    """Residual history of a saddle run on a semilog axis."""
    iters = [int(r["iter"]) for r in log_rows]
    resid = [float(r["residual"]) for r in log_rows]
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.semilogy(iters, resid, lw=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("force norm")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_landscape(graph, path) -> None:
    """One thumbnail per canonical class, grouped in rows by index."""
    nodes = sorted(graph.nodes.values(), key=lambda n: (-n.index, n.id))
    if not nodes:
        return
    cols = min(len(nodes), 5)
    rows = (len(nodes) + cols - 1) // cols
    fig, axes = plt.subplots(
        rows, cols, figsize=(2.4 * cols, 2.0 * rows), squeeze=False
    )
    for ax in axes.reshape(-1):
        ax.axis("off")
    for ax, node in zip(axes.reshape(-1), nodes):
        ax.axis("on")
        g = node.u.grid
        if g.dim == 1:
            ax.plot(g.coords(), node.u.values, lw=1.0)
            ax.set_ylim(-1.15, 1.15)
        else:
            ax.imshow(
                node.u.values.T,
                origin="lower",
                extent=(0, 1, 0, 1),
                cmap="RdBu_r",
                vmin=-1,
                vmax=1,
            )
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_title(f"index {node.index}", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_index_map(rows, jumps, path) -> None:
    """Heat map of the zero-state index over (alpha, kappa) with jump loci."""
    alphas = sorted({r[1] for r in rows})
    kappas = sorted({r[0] for r in rows})
    grid_vals = np.full((len(kappas), len(alphas)), np.nan)
    ai = {a: i for i, a in enumerate(alphas)}
    ki = {k: i for i, k in enumerate(kappas)}
    for kappa, alpha, index in rows:
        grid_vals[ki[kappa], ai[alpha]] = index
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    im = ax.pcolormesh(alphas, kappas, grid_vals, shading="nearest", cmap="viridis")
    fig.colorbar(im, ax=ax, label="index of the zero state")
    for kappa, k, alpha_star in jumps:
        ax.plot(alpha_star, kappa, "rx", ms=3)
    ax.set_xlabel("alpha")
    ax.set_ylabel("kappa")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
