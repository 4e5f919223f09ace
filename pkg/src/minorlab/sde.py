"""Ensemble simulation of the damped-conservative dynamics

    dx = [-eps*Z(x) + Z0(x)] dt + sqrt(2*eps) * sum_j Z_j(x) o dB^j

on the rescaled clock (rescaled time t corresponds to physical time
t/eps), plus the exact Gaussian law for models with affine drift.

Integrator: Stratonovich Heun (predictor-corrector).  For constant noise
fields, which covers every built-in model, the noise increment is exact
and the Stratonovich and Ito readings coincide; the second-order drift
treatment is what keeps the conservative flow on its energy shell to
O(dt^2) per unit time.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import _fastpath, rng
from .models import ModelSpec
from .symbolic import PolyExpr

DEFAULT_ESCAPE_LEVEL = 1e4
STABILITY_FRACTION = 0.5  # max tolerated |drift|*dt relative to 1 + sqrt(H)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    eps: float
    t_end: float  # rescaled horizon; physical horizon is t_end / eps
    dt_phys: float
    n_traj: int
    seed: int
    x0: object  # state vector, or (n_traj, d) array of starts
    escape_radius: float = DEFAULT_ESCAPE_LEVEL  # H-level, not a distance
    zero_eps: bool = False  # test hook: pure conservative flow, physical clock
    noise_scale: float = 1.0

    def __post_init__(self):
        if not self.zero_eps and not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        if self.dt_phys <= 0:
            raise ValueError("dt_phys must be positive")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")

    def steps(self) -> int:
        horizon = self.t_end if self.zero_eps else self.t_end / self.eps
        return int(np.ceil(horizon / self.dt_phys))

    def digest(self) -> str:
        blob = json.dumps(
            {
                "eps": self.eps, "t_end": self.t_end, "dt": self.dt_phys,
                "n": self.n_traj, "seed": self.seed,
                "x0": np.asarray(self.x0, dtype=float).tolist(),
                "escape": self.escape_radius, "zero_eps": self.zero_eps,
                "noise_scale": self.noise_scale,
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class EndpointSet:
    points: np.ndarray  # (n_traj, d); escaped rows hold the last in-domain state
    escaped: np.ndarray  # (n_traj,) bool
    meta: dict = field(default_factory=dict)

    def active_points(self) -> np.ndarray:
        return self.points[~self.escaped]


def _scalar_eval(poly: PolyExpr, eps: float):
    """Fast float evaluator for a fixed eps, minimizing temporaries."""
    d = poly.dim
    terms = [
        (float(c) * eps ** key[d], key[:d]) for key, c in poly.terms.items()
    ]

    def ev(xs: np.ndarray) -> np.ndarray:
        out = np.zeros(xs.shape[0])
        for coef, exps in terms:
            prod = None
            for i, p in enumerate(exps):
                if not p:
                    continue
                f = xs[:, i] if p == 1 else xs[:, i] ** p
                if prod is None:
                    prod = f.copy()
                else:
                    prod *= f
            if prod is None:
                out += coef
            else:
                prod *= coef
                out += prod
        return out

    return ev


def _field_eval(field, eps: float):
    """Evaluator for a vector field at fixed eps; affine fields use BLAS."""
    d = field.dim
    affine = all(c.state_degree() <= 1 for c in field.components)
    if affine:
        A = np.zeros((d, d))
        c = np.zeros(d)
        for i, comp in enumerate(field.components):
            for key, coeff in comp.terms.items():
                val = float(coeff) * eps ** key[d]
                if sum(key[:d]) == 0:
                    c[i] += val
                else:
                    j = next(k for k in range(d) if key[k])
                    A[i, j] += val
        if np.abs(c).max() == 0.0:
            return lambda xs: xs @ A.T
        return lambda xs: xs @ A.T + c
    comps = [_scalar_eval(comp, eps) for comp in field.components]

    def ev(xs: np.ndarray) -> np.ndarray:
        out = np.empty_like(xs)
        for j, f in enumerate(comps):
            out[:, j] = f(xs)
        return out

    return ev


def _model_kernels(model: ModelSpec, eps: float):
    eps_poly = PolyExpr.eps(model.d)
    drift_field = model.Z0 - model.Z.scale_poly(eps_poly)
    drift = _field_eval(drift_field, eps)
    H = _scalar_eval(model.H, 0.0)
    const_noise = []
    varying = []
    for Zj in model.Zs:
        if Zj.is_zero():
            continue
        v = Zj.constant_vector()
        if v is None:
            varying.append(Zj)
        else:
            const_noise.append(v)
    G = np.array(const_noise) if const_noise else np.zeros((0, model.d))
    return drift, H, G, varying


def simulate_ensemble(model: ModelSpec, cfg: SimConfig) -> EndpointSet:
    """Integrate the full ensemble to the rescaled horizon t_end."""
    steps = cfg.steps()
    horizon = cfg.t_end if cfg.zero_eps else cfg.t_end / cfg.eps
    taus = np.full(cfg.n_traj, horizon)
    return _run(model, cfg, taus, steps)


def simulate_to_times(model: ModelSpec, cfg: SimConfig, taus_rescaled: np.ndarray) -> EndpointSet:
    """Integrate each trajectory to its own rescaled end time.

    Trajectories are processed in descending end-time order (stably), so
    the active set is always a prefix and work shrinks with the tail.
    The endpoint set as a whole is deterministic in (model, cfg, taus).
    """
    taus_phys = np.asarray(taus_rescaled, dtype=float) / cfg.eps
    order = np.argsort(-taus_phys, kind="stable")
    inv = np.argsort(order, kind="stable")
    steps_each = np.maximum(1, np.rint(taus_phys[order] / cfg.dt_phys).astype(int))
    cfg_sorted = cfg
    x0 = np.asarray(cfg.x0, dtype=float)
    if x0.ndim == 2:
        cfg_sorted = replace(cfg, x0=x0[order])
    out = _run(model, cfg_sorted, None, int(steps_each[0]), steps_each=steps_each)
    return EndpointSet(points=out.points[inv], escaped=out.escaped[inv], meta=out.meta)


def _run(
    model: ModelSpec,
    cfg: SimConfig,
    taus_phys: Optional[np.ndarray],
    steps: int,
    steps_each: Optional[np.ndarray] = None,
) -> EndpointSet:
    d = model.d
    eps = 0.0 if cfg.zero_eps else cfg.eps
    drift, Hfn, G, varying = _model_kernels(model, eps)
    if varying and cfg.noise_scale:
        return _run_heun_varying(model, cfg, steps, steps_each)

    n = cfg.n_traj
    x = np.asarray(cfg.x0, dtype=float)
    x = np.tile(x, (n, 1)) if x.ndim == 1 else x.copy()
    if x.shape != (n, d):
        raise ValueError(f"x0 must have shape ({n}, {d}) or ({d},)")

    h = (cfg.t_end if cfg.zero_eps else cfg.t_end / cfg.eps) / steps if steps_each is None else cfg.dt_phys
    amp = cfg.noise_scale * np.sqrt(2.0 * eps * h)
    key = rng.derive_seed(cfg.seed, "paths")
    r = G.shape[0]

    escaped = Hfn(x) >= cfg.escape_radius
    any_escaped = bool(escaped.any())
    active_n = n
    check_every = 16  # finite/stability heuristics are sampled, escapes are not

    backend = os.environ.get("MINORLAB_BACKEND", "auto")
    if _fastpath.HAVE_NUMBA and backend != "numpy":
        return _run_fused(
            model, cfg, x, escaped, steps, steps_each, h, amp, key, G, eps, check_every
        )

    for s in range(steps):
        if steps_each is not None:
            # retire trajectories whose horizon has arrived (descending order)
            while active_n > 0 and steps_each[active_n - 1] <= s:
                active_n -= 1
            if active_n == 0:
                break
        sl = slice(0, active_n) if steps_each is not None else slice(0, n)
        xs = x[sl]
        esc = escaped[sl]

        if r and amp:
            dw = rng.normal_block(key, s, 0, xs.shape[0], r)
            dw *= amp
            noise = dw @ G
        else:
            noise = 0.0
        a0 = drift(xs)
        pred = xs + h * a0 + noise
        a1 = drift(pred)
        a1 += a0
        a1 *= 0.5 * h
        x_new = xs + a1
        if r and amp:
            x_new += noise

        if s % check_every == 0:
            live = ~esc
            bad = live & ~np.isfinite(x_new).all(axis=-1)
            if bad.any():
                i = int(np.argmax(bad))
                raise SimulationError(
                    f"non-finite state by step {s}, trajectory {i}"
                )
            if not cfg.zero_eps:
                drift_mag = np.abs(a1).max(axis=-1)
                viol = live & (
                    drift_mag
                    > STABILITY_FRACTION * (1.0 + np.sqrt(np.maximum(Hfn(xs), 0.0)))
                )
                if viol.any():
                    i = int(np.argmax(viol))
                    raise SimulationError(
                        f"dt stability heuristic tripped at step {s}, trajectory {i}: "
                        f"drift moves the state by {drift_mag[i]:.3g} in one step"
                    )

        newly = Hfn(x_new) >= cfg.escape_radius
        if any_escaped or newly.any():
            newly &= ~esc
            keep_old = esc | newly
            x[sl] = np.where(keep_old[:, None], xs, x_new)
            escaped[sl] = keep_old
            any_escaped = True
        else:
            x[sl] = x_new

    meta = {"model": model.name, "config": cfg.digest(), "steps": steps}
    return EndpointSet(points=x, escaped=escaped, meta=meta)


def _run_fused(model, cfg, x, escaped, steps, steps_each, h, amp, key, G, eps, check_every):
    """numba-fused stepping; same scheme and escape semantics as _run."""
    n = cfg.n_traj
    r = G.shape[0]
    eps_poly = PolyExpr.eps(model.d)
    drift_field = model.Z0 - model.Z.scale_poly(eps_poly)
    dcoef, dexp, dcomp = _fastpath.field_tables(drift_field, eps)
    hcoef, hexp = _fastpath.scalar_tables(model.H)
    nblocks = (n + _fastpath.BLOCK - 1) // _fastpath.BLOCK
    status = np.zeros(nblocks, dtype=np.int64)
    empty_dw = np.zeros((n, 0))
    active_n = n

    for s in range(steps):
        if steps_each is not None:
            while active_n > 0 and steps_each[active_n - 1] <= s:
                active_n -= 1
            if active_n == 0:
                break
        m = active_n if steps_each is not None else n
        if r and amp:
            dw = rng.normal_block(key, s, 0, m, r)
            dw *= amp
        else:
            dw = empty_dw[:m]
        check = (s % check_every == 0) and not cfg.zero_eps
        _fastpath.heun_step(
            x[:m], dw, G, h, escaped[:m],
            dcoef, dexp, dcomp, hcoef, hexp,
            cfg.escape_radius, STABILITY_FRACTION, check, status,
        )
        worst = int(status.max(initial=0))
        if worst == _fastpath.NONFINITE:
            raise SimulationError(f"non-finite state by step {s}")
        if worst == _fastpath.UNSTABLE:
            raise SimulationError(
                f"dt stability heuristic tripped at step {s}: "
                "the drift moves a state too far in one step"
            )
    meta = {"model": model.name, "config": cfg.digest(), "steps": steps}
    return EndpointSet(points=x, escaped=escaped, meta=meta)


def _run_heun_varying(model, cfg, steps, steps_each):
    """Euler-Heun predictor-corrector for state-dependent noise."""
    eps = 0.0 if cfg.zero_eps else cfg.eps
    drift, Hfn, G, varying = _model_kernels(model, eps)
    evs = [_field_eval(Z, eps) for Z in model.Zs if not Z.is_zero()]
    n = cfg.n_traj
    x = np.asarray(cfg.x0, dtype=float)
    x = np.tile(x, (n, 1)) if x.ndim == 1 else x.copy()
    h = (cfg.t_end if cfg.zero_eps else cfg.t_end / cfg.eps) / steps
    amp = cfg.noise_scale * np.sqrt(2.0 * eps * h)
    key = rng.derive_seed(cfg.seed, "paths")
    escaped = np.zeros(n, dtype=bool)

    def diffusion(xs, dw):
        out = np.zeros_like(xs)
        for j, ev in enumerate(evs):
            out += dw[:, j : j + 1] * ev(xs)
        return out

    for s in range(steps):
        dw = amp * rng.normal_block(key, s, 0, n, len(evs))
        a0 = drift(x)
        b0 = diffusion(x, dw)
        pred = x + h * a0 + b0
        live = ~escaped
        if (live & ~np.isfinite(pred).all(axis=-1)).any():
            raise SimulationError(f"non-finite state at step {s}")
        a1 = drift(pred)
        b1 = diffusion(pred, dw)
        x_new = x + 0.5 * h * (a0 + a1) + 0.5 * (b0 + b1)
        newly = live & (Hfn(x_new) >= cfg.escape_radius)
        x = np.where((escaped | newly)[:, None], x, x_new)
        escaped |= newly
    meta = {"model": model.name, "config": cfg.digest(), "steps": steps}
    return EndpointSet(points=x, escaped=escaped, meta=meta)


# ---------------------------------------------------------------------------
# exact law for affine drift


@dataclass
class GaussianLaw:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        sym_err = np.abs(self.cov - self.cov.T).max()
        if sym_err > 1e-12:
            raise ValueError(f"covariance asymmetry {sym_err:.3g}")
        self.cov = 0.5 * (self.cov + self.cov.T)
        w = np.linalg.eigvalsh(self.cov)
        if w.min() < -1e-12:
            raise ValueError(f"covariance has negative eigenvalue {w.min():.3g}")

    def density(self, pts: np.ndarray) -> np.ndarray:
        d = len(self.mean)
        cov = self.cov + 1e-300 * np.eye(d)
        L = np.linalg.cholesky(cov)
        diff = pts - self.mean
        sol = scipy.linalg.solve_triangular(L, diff.T, lower=True)
        q = np.sum(sol**2, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        return np.exp(-0.5 * (q + logdet + d * np.log(2 * np.pi)))


def drift_matrix(model: ModelSpec, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """(A, c) with drift(x) = A x + c; raises if the drift is not affine."""
    d = model.d
    drift = model.drift()
    A = np.zeros((d, d))
    c = np.zeros(d)
    for i, comp in enumerate(drift.components):
        for key, coeff in comp.terms.items():
            sdeg = sum(key[:d])
            val = float(coeff) * eps ** key[d]
            if sdeg == 0:
                c[i] += val
            elif sdeg == 1:
                j = next(k for k in range(d) if key[k])
                A[i, j] += val
            else:
                raise ValueError("drift is nonlinear; no Gaussian law")
    return A, c


def noise_gram(model: ModelSpec) -> np.ndarray:
    """sum_j Z_j Z_j^T for constant noise fields."""
    G = np.zeros((model.d, model.d))
    for Zj in model.Zs:
        v = Zj.constant_vector()
        if v is None:
            raise ValueError("noise fields must be constant for the Gaussian law")
        G += np.outer(v, v)
    return G


def _rk4_affine_map(K: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """One classical RK4 step of y' = K y + b as the affine map (R, S*b)."""
    m = K.shape[0]
    I = np.eye(m)
    hK = h * K
    R = I + hK + hK @ hK / 2 + hK @ hK @ hK / 6 + hK @ hK @ hK @ hK / 24
    S = h * (I + hK / 2 + hK @ hK / 6 + hK @ hK @ hK / 24)
    return R, S


def gaussian_oracle(
    model: ModelSpec,
    eps: float,
    t: float,
    x0: Sequence[float],
    cov0: Optional[np.ndarray] = None,
    dt: float = 1e-3,
) -> GaussianLaw:
    """Exact law at rescaled time t for affine drift and constant noise.

    Mean: expm(A * t/eps) x0 (plus the affine part).  Covariance: the
    matrix ODE C' = AC + CA^T + Q integrated by fixed-step classical RK4
    in physical time; the per-step affine map is composed by squaring, so
    large horizons cost O(log steps).
    """
    A, c = drift_matrix(model, eps)
    Q = 2.0 * eps * noise_gram(model)
    d = model.d
    t_phys = t / eps
    x0 = np.asarray(x0, dtype=float)

    if t_phys == 0.0:
        cov = np.zeros((d, d)) if cov0 is None else np.asarray(cov0, dtype=float)
        return GaussianLaw(mean=x0.copy(), cov=cov)

    aug = np.zeros((d + 1, d + 1))
    aug[:d, :d] = A * t_phys
    aug[:d, d] = c * t_phys
    E = scipy.linalg.expm(aug)
    mean = E[:d, :d] @ x0 + E[:d, d]

    steps = max(1, int(np.ceil(t_phys / dt)))
    h = t_phys / steps
    K = np.kron(np.eye(d), A) + np.kron(A, np.eye(d))
    R, S = _rk4_affine_map(K, h)
    b = S @ Q.reshape(-1)
    # compose (R, b)^steps by binary squaring
    M = np.eye(d * d)
    acc = np.zeros(d * d)
    base_M, base_b = R, b
    k = steps
    while k:
        if k & 1:
            acc = base_M @ acc + base_b
            M = base_M @ M
        base_b = base_M @ base_b + base_b
        base_M = base_M @ base_M
        k >>= 1
    vec0 = (np.zeros((d, d)) if cov0 is None else np.asarray(cov0, dtype=float)).reshape(-1)
    cov = (M @ vec0 + acc).reshape(d, d)
    return GaussianLaw(mean=mean, cov=cov)


def stationary_law(model: ModelSpec, eps: float) -> GaussianLaw:
    """Solve A S + S A^T + Q = 0 for the affine-drift stationary Gaussian."""
    A, c = drift_matrix(model, eps)
    Q = 2.0 * eps * noise_gram(model)
    S = scipy.linalg.solve_continuous_lyapunov(A, -Q)
    mean = np.linalg.solve(A, -c) if np.abs(c).max() > 0 else np.zeros(model.d)
    return GaussianLaw(mean=mean, cov=S)
