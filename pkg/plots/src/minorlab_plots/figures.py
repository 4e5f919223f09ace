"""Render the diagnostic figures from minorlab CSV outputs.

Every renderer is deterministic: fixed style, no timestamps in the image
metadata, and the input order fixes the draw order.  Axis labels carry
units (rescaled time, eps, density per unit volume).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, read_rows

_SAVE_KW = dict(dpi=110, metadata={"Date": None})


def _style(ax):
    ax.grid(True, alpha=0.3, linewidth=0.5)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)


def plot_sweep(inputs: list[str], output: str):
    """lambda-hat vs eps with CI whiskers, log-eps axis."""
    rows = [r for path in inputs for r in read_rows(path, "sweep")]
    eps = np.array([float(r["eps"]) for r in rows])
    lam = np.array([float(r["lambda_hat"]) for r in rows])
    lo = np.array([float(r["lambda_ci_low"]) for r in rows])
    order = np.argsort(eps)
    eps, lam, lo = eps[order], lam[order], lo[order]
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.errorbar(
        eps, lam, yerr=[lam - lo, np.zeros_like(lam)],
        fmt="o-", capsize=4, color="#1f5fa8", ecolor="#8fb7dd", label="estimate",
    )
    ax.fill_between(eps, lo, lam, color="#8fb7dd", alpha=0.4, label="95% CI (lower)")
    ax.set_xscale("log")
    ax.set_xlabel("eps")
    ax.set_ylabel("density floor per unit volume")
    ax.set_ylim(bottom=0)
    ax.set_title("sublevel-set density floor across the noise sweep")
    ax.legend(frameon=False, fontsize=8)
    _style(ax)
    fig.tight_layout()
    fig.savefig(output, **_SAVE_KW)
    plt.close(fig)


def plot_tv_curves(inputs: list[str], output: str):
    """Total variation decay vs rescaled time, one curve per eps."""
    rows = [r for path in inputs for r in read_rows(path, "tv_curves")]
    by_eps: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        by_eps.setdefault(r["eps"], []).append((float(r["t"]), float(r["tv"])))
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for eps in sorted(by_eps, key=float):
        pts = sorted(by_eps[eps])
        ax.plot([t for t, _ in pts], [v for _, v in pts], marker=".", label=f"eps={eps}")
    ax.axhline(0.25, color="gray", linestyle="--", linewidth=0.8)
    ax.set_xlabel("rescaled time")
    ax.set_ylabel("total variation to equilibrium")
    ax.set_title("mixing on the rescaled clock")
    ax.legend(frameon=False, fontsize=8)
    _style(ax)
    fig.tight_layout()
    fig.savefig(output, **_SAVE_KW)
    plt.close(fig)


def plot_density(inputs: list[str], output: str):
    """Heatmap of a 2-d density dump, masked to the sublevel set."""
    if len(inputs) != 1:
        raise SchemaError("density heatmaps take exactly one CSV")
    rows = read_rows(inputs[0], "density")
    coords = [k for k in rows[0] if k.startswith("x") and k not in ("x",)]
    if len(coords) != 2:
        raise SchemaError("density heatmaps need a two-dimensional dump")
    xs = np.array([float(r["x1"]) for r in rows])
    ys = np.array([float(r["x2"]) for r in rows])
    est = np.array([float(r["estimate"]) for r in rows])
    mask = np.array([r["hr_mask"] == "1" for r in rows])
    ux, uy = np.unique(xs), np.unique(ys)
    grid = np.full((len(ux), len(uy)), np.nan)
    ix = np.searchsorted(ux, xs)
    iy = np.searchsorted(uy, ys)
    vals = np.where(mask, est, np.nan)
    grid[ix, iy] = vals
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    pm = ax.pcolormesh(ux, uy, grid.T, shading="nearest", cmap="viridis")
    fig.colorbar(pm, ax=ax, label="density per unit volume")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title("transition density over the sublevel set")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(output, **_SAVE_KW)
    plt.close(fig)


def plot_sumset_growth(inputs: list[str], output: str):
    """Component count and measure of the k-fold sumset."""
    rows = [r for path in inputs for r in read_rows(path, "sumset_growth")]
    by_set: dict[str, list[dict]] = {}
    for r in rows:
        by_set.setdefault(r["set"], []).append(r)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.6, 3.2))
    for sid in sorted(by_set, key=int):
        pts = sorted(by_set[sid], key=lambda r: int(r["k"]))
        ks = [int(r["k"]) for r in pts]
        ax1.plot(ks, [int(r["components"]) for r in pts], marker="o", label=f"set {sid}")
        ax2.plot(ks, [float(r["measure"]) for r in pts], marker="o")
    ax1.set_xlabel("folds k")
    ax1.set_ylabel("components of kA")
    ax1.set_xscale("log", base=2)
    ax2.set_xlabel("folds k")
    ax2.set_ylabel("measure of kA")
    ax2.set_xscale("log", base=2)
    ax2.set_yscale("log")
    if len(by_set) <= 6:
        ax1.legend(frameon=False, fontsize=7)
    for ax in (ax1, ax2):
        _style(ax)
    fig.suptitle("interval sumset growth", fontsize=10)
    fig.tight_layout()
    fig.savefig(output, **_SAVE_KW)
    plt.close(fig)


KINDS = {
    "sweep": plot_sweep,
    "tv": plot_tv_curves,
    "density": plot_density,
    "sumset": plot_sumset_growth,
}


def plot(kind: str, inputs: list[str], output: str):
    """Render one figure kind from CSV inputs to a raster image."""
    if kind not in KINDS:
        raise SchemaError(f"unknown figure kind {kind!r}; choose from {sorted(KINDS)}")
    KINDS[kind](list(inputs), output)
