"""Histogram estimation of the rescaled transition density q_t = p_{t/eps},
the exponentially time-averaged density, minorization sweeps over
sublevel sets, and the total-variation mixing clock for linear models.

Estimates are per-cell binomial: counts / (n_effective * cell volume),
with Clopper-Pearson 95% intervals scaled the same way.  Comparisons
against the Gaussian oracle are CI-aware; nothing is asserted by raw
equality.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.stats

from . import rng
from .models import ModelSpec
from .sde import (
    GaussianLaw,
    SimConfig,
    gaussian_oracle,
    simulate_ensemble,
    simulate_to_times,
    stationary_law,
)

DEFAULT_MAX_OUT_FRACTION = 0.5
CI_LEVEL = 0.95


class DensityError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    box: tuple  # ((lo, hi), ...) per axis
    cells: tuple  # cell count per axis
    R: float  # sublevel set level for the mask

    def __post_init__(self):
        if len(self.box) != len(self.cells):
            raise ValueError("box and cells must agree on dimension")
        for (lo, hi), c in zip(self.box, self.cells):
            if hi <= lo or c < 1:
                raise ValueError("invalid grid axis")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def cell_volume(self) -> float:
        return float(
            np.prod([(hi - lo) / c for (lo, hi), c in zip(self.box, self.cells)])
        )

    def centers(self) -> np.ndarray:
        """(n_cells, dim) array of cell centers in flat C order."""
        axes = [
            lo + (hi - lo) * (np.arange(c) + 0.5) / c
            for (lo, hi), c in zip(self.box, self.cells)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def flat_index(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(flat cell index, in-box mask) for an array of points."""
        idx = np.zeros(len(pts), dtype=np.int64)
        ok = np.ones(len(pts), dtype=bool)
        for a, ((lo, hi), c) in enumerate(zip(self.box, self.cells)):
            j = np.floor((pts[:, a] - lo) / (hi - lo) * c).astype(np.int64)
            ok &= (j >= 0) & (j < c)
            idx = idx * c + np.clip(j, 0, c - 1)
        return idx, ok


def clopper_pearson(counts: np.ndarray, n: int, level: float = CI_LEVEL):
    """Exact binomial CI for each count out of n trials."""
    counts = np.asarray(counts)
    alpha = 1.0 - level
    lo = np.zeros(counts.shape)
    hi = np.ones(counts.shape)
    pos = counts > 0
    lo[pos] = scipy.stats.beta.ppf(alpha / 2, counts[pos], n - counts[pos] + 1)
    below = counts < n
    hi[below] = scipy.stats.beta.ppf(
        1 - alpha / 2, counts[below] + 1, n - counts[below]
    )
    return lo, hi


@dataclass
class DensityGrid:
    grid: GridSpec
    counts: np.ndarray  # flat int64
    n_effective: int
    hr_mask: np.ndarray  # flat bool, cell center has H < R
    meta: dict = field(default_factory=dict)

    @property
    def estimate(self) -> np.ndarray:
        return self.counts / (self.n_effective * self.grid.cell_volume)

    def ci(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = clopper_pearson(self.counts, self.n_effective)
        vol = self.grid.cell_volume
        return lo / vol, hi / vol

    def mass(self) -> float:
        return float(self.counts.sum()) / self.n_effective

    def to_csv(self, path: str):
        centers = self.grid.centers()
        est = self.estimate
        lo, hi = self.ci()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["cell_index"]
                + [f"x{i + 1}" for i in range(self.grid.dim)]
                + ["estimate", "ci_lo", "ci_hi", "hr_mask"]
            )
            for i in range(self.grid.n_cells):
                w.writerow(
                    [i]
                    + [f"{c:.6g}" for c in centers[i]]
                    + [f"{est[i]:.8g}", f"{lo[i]:.8g}", f"{hi[i]:.8g}", int(self.hr_mask[i])]
                )


def _mask_for(model: ModelSpec, grid: GridSpec) -> np.ndarray:
    Hfn = model.H.compile()
    return Hfn(grid.centers()) < grid.R


def bin_endpoints(
    model: ModelSpec,
    grid: GridSpec,
    points: np.ndarray,
    escaped: np.ndarray,
    meta: Optional[dict] = None,
    max_out_fraction: float = DEFAULT_MAX_OUT_FRACTION,
) -> DensityGrid:
    keep = ~escaped
    pts = points[keep]
    idx, ok = grid.flat_index(pts)
    out_frac = 1.0 - ok.mean() if len(pts) else 0.0
    if out_frac > max_out_fraction:
        raise DensityError(
            f"grid does not cover the endpoint cloud: {out_frac:.1%} outside"
        )
    counts = np.bincount(idx[ok], minlength=grid.n_cells).astype(np.int64)
    mask = _mask_for(model, grid)
    meta = dict(meta or {})
    meta["out_of_box_fraction"] = out_frac
    return DensityGrid(
        grid=grid, counts=counts, n_effective=int(keep.sum()), hr_mask=mask, meta=meta
    )


def estimate_density_grid(
    model: ModelSpec,
    starts: Sequence,
    eps: float,
    t0: float,
    grid: GridSpec,
    n_traj: int,
    seed: int,
    dt_phys: Optional[float] = None,
    escape_radius: float = 1e4,
) -> list[DensityGrid]:
    """One histogram of endpoints at rescaled time t0 per start point."""
    Hfn = model.H.compile()
    starts = [np.asarray(s, dtype=float) for s in starts]
    for s in starts:
        if Hfn(s[None, :])[0] >= grid.R:
            raise ValueError(f"start {s} lies outside the sublevel set H < {grid.R}")
    dt = dt_phys if dt_phys is not None else default_dt(model)
    out = []
    for i, s in enumerate(starts):
        cfg = SimConfig(
            eps=eps, t_end=t0, dt_phys=dt, n_traj=n_traj,
            seed=rng.derive_seed(seed, "density", i), x0=tuple(s),
            escape_radius=escape_radius,
        )
        es = simulate_ensemble(model, cfg)
        out.append(
            bin_endpoints(
                model, grid, es.points, es.escaped,
                meta={"start_index": i, "start": s.tolist(), "eps": eps, "t0": t0,
                      "n_traj": n_traj, "seed": seed},
            )
        )
    return out


def estimate_time_averaged(
    model: ModelSpec,
    start,
    eps: float,
    t0: float,
    alpha: Optional[float],
    grid: GridSpec,
    n_traj: int,
    seed: int,
    dt_phys: Optional[float] = None,
    escape_radius: float = 1e4,
) -> DensityGrid:
    """Unbiased histogram of the exponentially time-averaged density.

    Each trajectory runs to its own rescaled time t0 + Exp(alpha); the
    endpoint histogram estimates alpha * int_{t0}^inf e^{-alpha(t-t0)}
    q_t(x, .) dt.  The default alpha is inf div(Z) (exact for constant
    divergence).
    """
    if alpha is None:
        alpha = float(model.alpha())
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    dt = dt_phys if dt_phys is not None else default_dt(model)
    key = rng.derive_seed(seed, "timeavg")
    taus = t0 + rng.exponential_vector(key, 0, n_traj, alpha)
    cfg = SimConfig(
        eps=eps, t_end=float(taus.max()), dt_phys=dt, n_traj=n_traj,
        seed=key, x0=tuple(np.asarray(start, dtype=float)),
        escape_radius=escape_radius,
    )
    es = simulate_to_times(model, cfg, taus)
    return bin_endpoints(
        model, grid, es.points, es.escaped,
        meta={"start": list(np.asarray(start, float)), "eps": eps, "t0": t0,
              "alpha": alpha, "n_traj": n_traj, "seed": seed},
    )


def default_dt(model: ModelSpec) -> float:
    """1e-3 scaled down when the model carries large rate constants."""
    scale = max((abs(float(v)) for v in model.params.values()), default=1.0)
    return 1e-3 * min(1.0, 1.0 / scale)


# ---------------------------------------------------------------------------
# start lattices and minorization sweeps


def lattice_starts(
    model: ModelSpec, R: float, per_axis: int = 3, scale: float = 0.9
) -> np.ndarray:
    """A per-axis {-c, 0, +c}^d lattice spanning the set H < scale * R."""
    Hfn = model.H.compile()
    d = model.d

    def worst_level(c: float) -> float:
        vals = np.array(
            np.meshgrid(*[[-c, 0.0, c]] * d, indexing="ij")
        ).reshape(d, -1).T
        return float(Hfn(vals).max())

    lo, hi = 0.0, 1.0
    while worst_level(hi) < scale * R:
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if worst_level(mid) < scale * R:
            lo = mid
        else:
            hi = mid
    c = lo
    axes = [np.array([-c, 0.0, c])] * d if per_axis == 3 else [
        np.linspace(-c, c, per_axis)
    ] * d
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(d, -1).T
    return pts


@dataclass
class MinorizationReport:
    R: float
    t0: float
    eps_list: list
    lambda_hat: dict  # eps -> min over (start, masked cell) of estimate
    lambda_ci_low: dict
    argmin: dict  # eps -> (start index, cell index)
    ratio: float
    passed: bool
    n_traj: int
    seed: int
    per_eps_rows: list = field(default_factory=list)

    def to_csv(self, path: str):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["eps", "t0", "R", "lambda_hat", "lambda_ci_low",
                 "argmin_start", "argmin_cell", "n_traj", "seed"]
            )
            for row in self.per_eps_rows:
                w.writerow(row)

    def to_json(self) -> str:
        return json.dumps(
            {
                "task": "minorize",
                "R": self.R, "t0": self.t0,
                "eps_list": self.eps_list,
                "lambda_hat": {str(k): v for k, v in self.lambda_hat.items()},
                "lambda_ci_low": {str(k): v for k, v in self.lambda_ci_low.items()},
                "ratio": self.ratio,
                "verdict": "PASS" if self.passed else "FAIL",
                "n_traj": self.n_traj,
                "seed": self.seed,
            },
            indent=2,
        )


def _masked_min(grids: list[DensityGrid]) -> tuple[float, float, tuple[int, int]]:
    lam = math.inf
    lam_lo = math.inf
    arg = (-1, -1)
    for si, g in enumerate(grids):
        est = g.estimate
        lo, _ = g.ci()
        masked = np.where(g.hr_mask)[0]
        if masked.size == 0:
            raise DensityError("the mask H < R selects no cells")
        ci = int(masked[np.argmin(est[masked])])
        if est[ci] < lam:
            lam = float(est[ci])
            arg = (si, ci)
        lam_lo = min(lam_lo, float(lo[masked].min()))
    return lam, lam_lo, arg


def minorization_sweep(
    model: ModelSpec,
    R: float,
    t0: float,
    eps_list: Sequence[float],
    grid: GridSpec,
    n_traj: int,
    seed: int,
    starts: Optional[np.ndarray] = None,
    dt_phys: Optional[Callable[[float], float]] = None,
    ratio_bound: float = 3.0,
) -> MinorizationReport:
    """Estimate lambda(eps) = min over (start, masked cell) for each eps.

    The sweep passes when every per-eps CI lower bound is positive and
    max lambda-hat / min lambda-hat stays within the ratio bound.
    """
    if starts is None:
        starts = lattice_starts(model, R)
    lam, lam_lo, arg = {}, {}, {}
    rows = []
    for ei, eps in enumerate(eps_list):
        dt = dt_phys(eps) if callable(dt_phys) else dt_phys
        grids = estimate_density_grid(
            model, starts, eps, t0, grid, n_traj,
            rng.derive_seed(seed, "sweep", ei), dt_phys=dt,
        )
        l, llo, a = _masked_min(grids)
        lam[eps], lam_lo[eps], arg[eps] = l, llo, a
        rows.append(
            [eps, t0, R, f"{l:.8g}", f"{llo:.8g}", a[0], a[1], n_traj, seed]
        )
    vals = [lam[e] for e in eps_list]
    ratio = max(vals) / min(vals) if min(vals) > 0 else math.inf
    passed = min(lam_lo[e] for e in eps_list) > 0 and ratio <= ratio_bound
    return MinorizationReport(
        R=R, t0=t0, eps_list=list(eps_list), lambda_hat=lam,
        lambda_ci_low=lam_lo, argmin=arg, ratio=ratio, passed=passed,
        n_traj=n_traj, seed=seed, per_eps_rows=rows,
    )


# ---------------------------------------------------------------------------
# Gaussian-law oracles (linear models)


def oracle_cell_averages(law: GaussianLaw, grid: GridSpec, nodes: int = 5) -> np.ndarray:
    """Cell-averaged oracle density by tensor Gauss-Legendre quadrature."""
    d = grid.dim
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)
    axes_nodes, axes_weights = [], []
    for (lo, hi), c in zip(grid.box, grid.cells):
        w = (hi - lo) / c
        edges = lo + w * np.arange(c)
        pts = edges[:, None] + (gl_x[None, :] + 1) * 0.5 * w  # (c, nodes)
        axes_nodes.append(pts)
        axes_weights.append(np.full(nodes, 0.5) * gl_w)  # weights sum to 1
    # build all cell x node combinations
    shape = tuple(grid.cells)
    out = np.zeros(shape)
    mesh_cells = np.meshgrid(*[np.arange(c) for c in grid.cells], indexing="ij")
    node_mesh = np.meshgrid(*[np.arange(nodes)] * d, indexing="ij")
    node_idx = [m.reshape(-1) for m in node_mesh]
    wprod = np.ones(nodes**d)
    for a in range(d):
        wprod = wprod * axes_weights[a][node_idx[a]]
    for flat_nodes, wgt in zip(zip(*node_idx), wprod):
        pts = np.stack(
            [axes_nodes[a][mesh_cells[a], flat_nodes[a]].reshape(-1) for a in range(d)],
            axis=-1,
        )
        out += (wgt * law.density(pts)).reshape(shape)
    return out.reshape(-1)


def oracle_minorization_sweep(
    model: ModelSpec,
    R: float,
    t0: float,
    eps_list: Sequence[float],
    grid: GridSpec,
    starts: Optional[np.ndarray] = None,
) -> dict:
    """Exact-law analogue of the Monte Carlo sweep; the design target."""
    if starts is None:
        starts = lattice_starts(model, R)
    mask = _mask_for(model, grid)
    lam = {}
    arg = {}
    for eps in eps_list:
        best = math.inf
        best_arg = (-1, -1)
        for si, s in enumerate(starts):
            law = gaussian_oracle(model, eps, t0, s)
            cells = oracle_cell_averages(law, grid)
            masked = np.where(mask)[0]
            ci = int(masked[np.argmin(cells[masked])])
            if cells[ci] < best:
                best, best_arg = float(cells[ci]), (si, ci)
        lam[eps] = best
        arg[eps] = best_arg
    vals = list(lam.values())
    return {"lambda": lam, "argmin": arg, "ratio": max(vals) / min(vals)}


def time_averaged_oracle(
    model: ModelSpec,
    eps: float,
    t0: float,
    alpha: float,
    grid: GridSpec,
    x0,
    nodes: int = 40,
) -> np.ndarray:
    """Gauss-Laguerre quadrature of the averaged oracle density per cell."""
    u, w = np.polynomial.laguerre.laggauss(nodes)
    out = np.zeros(grid.n_cells)
    for ui, wi in zip(u, w):
        law = gaussian_oracle(model, eps, t0 + ui / alpha, x0)
        out += wi * oracle_cell_averages(law, grid)
    return out


# ---------------------------------------------------------------------------
# mixing clock (d = 2 linear models, deterministic quadrature)


@dataclass
class MixingReport:
    eps_list: list
    t_mix: dict  # eps -> rescaled mixing time
    products: dict  # eps -> eps * physical mixing time (== rescaled t_mix)
    spread: float
    tv_curves: dict  # eps -> list of (t, tv)

    def to_csv(self, path: str):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "t_mix", "product"])
            for e in self.eps_list:
                w.writerow([e, f"{self.t_mix[e]:.6g}", f"{self.products[e]:.6g}"])

    def curves_to_csv(self, path: str):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "t", "tv"])
            for e in self.eps_list:
                for t, tv in self.tv_curves[e]:
                    w.writerow([e, f"{t:.6g}", f"{tv:.8g}"])


def tv_distance_grid(
    law_a: GaussianLaw, law_b: GaussianLaw, box: float = 6.0, cells: int = 240
) -> float:
    """Total variation by midpoint quadrature of |density difference|/2."""
    if len(law_a.mean) != 2:
        raise ValueError("quadrature TV is implemented for d = 2 only")
    xs = np.linspace(-box, box, cells, endpoint=False) + box / cells
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X.reshape(-1), Y.reshape(-1)], axis=-1)
    w = (2 * box / cells) ** 2
    da = law_a.density(pts)
    db = law_b.density(pts)
    return float(0.5 * np.abs(da - db).sum() * w)


def mixing_time(
    model: ModelSpec,
    eps_list: Sequence[float],
    tv_threshold: float = 0.25,
    t_grid: Optional[np.ndarray] = None,
    x0=(2.0, 0.0),
    cov0: Optional[np.ndarray] = None,
) -> MixingReport:
    """First rescaled time with TV(law(t), stationary) <= threshold, per eps."""
    if model.d != 2:
        raise ValueError("mixing_time needs a two-dimensional linear model")
    if t_grid is None:
        t_grid = np.arange(0.25, 12.01, 0.25)
    t_mix, products, curves = {}, {}, {}
    for eps in eps_list:
        pi = stationary_law(model, eps)
        hit = None
        curve = []
        for t in t_grid:
            law = gaussian_oracle(model, eps, float(t), x0, cov0=cov0)
            tv = tv_distance_grid(law, pi)
            curve.append((float(t), tv))
            if hit is None and tv <= tv_threshold:
                hit = float(t)  # first grid time under the threshold
            if hit is not None and t > hit + 0.5:
                break
        if hit is None:
            raise DensityError(f"threshold {tv_threshold} not reached on the grid")
        t_mix[eps] = hit
        products[eps] = hit  # eps * (hit / eps)
        curves[eps] = curve
    vals = list(t_mix.values())
    return MixingReport(
        eps_list=list(eps_list), t_mix=t_mix, products=products,
        spread=max(vals) / min(vals), tv_curves=curves,
    )
