"""Fused Heun stepping kernel (numba), used by sde when importable.

The kernel processes trajectories in fixed 2048-wide blocks; each block
only touches its own scratch, so the result is bit-identical for any
thread count.  Polynomial drift and Hamiltonian are passed as flat term
tables (coefficient, per-variable exponents, target component).
fastmath stays off: reproducibility over the last few ulps of speed.
"""

from __future__ import annotations

import warnings

import numpy as np

try:
    import numba

    # the sandbox ships an older TBB; numba falls back to omp and warns
    warnings.filterwarnings(
        "ignore", message=".*TBB.*", category=numba.NumbaWarning
    )
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*a, **k):  # type: ignore
        def deco(f):
            return f

        return deco

    prange = range  # type: ignore

BLOCK = 2048
OK, NONFINITE, UNSTABLE = 0, 1, 2


def field_tables(field, eps: float):
    """Flatten a vector field into (coef, exps, comp) arrays at fixed eps."""
    d = field.dim
    coefs, exps, comps = [], [], []
    for j, poly in enumerate(field.components):
        for key, c in poly.terms.items():
            coefs.append(float(c) * eps ** key[d])
            exps.append(key[:d])
            comps.append(j)
    if not coefs:
        return (
            np.zeros(0),
            np.zeros((0, d), dtype=np.int64),
            np.zeros(0, dtype=np.int64),
        )
    return (
        np.array(coefs),
        np.array(exps, dtype=np.int64),
        np.array(comps, dtype=np.int64),
    )


def scalar_tables(poly, eps: float = 0.0):
    d = poly.dim
    coefs, exps = [], []
    for key, c in poly.terms.items():
        coefs.append(float(c) * eps ** key[d])
        exps.append(key[:d])
    if not coefs:
        return np.zeros(0), np.zeros((0, d), dtype=np.int64)
    return np.array(coefs), np.array(exps, dtype=np.int64)


@njit(cache=True, inline="always")
def _eval_field(xrow, coefs, exps, comps, out):
    for k in range(out.shape[0]):
        out[k] = 0.0
    for t in range(coefs.shape[0]):
        term = coefs[t]
        for k in range(xrow.shape[0]):
            e = exps[t, k]
            if e == 0:
                continue
            v = xrow[k]
            if e == 1:
                term *= v
            elif e == 2:
                term *= v * v
            else:
                term *= v ** e
        out[comps[t]] += term


@njit(cache=True, inline="always")
def _eval_scalar(xrow, coefs, exps):
    acc = 0.0
    for t in range(coefs.shape[0]):
        term = coefs[t]
        for k in range(xrow.shape[0]):
            e = exps[t, k]
            if e == 0:
                continue
            v = xrow[k]
            if e == 1:
                term *= v
            elif e == 2:
                term *= v * v
            else:
                term *= v ** e
        acc += term
    return acc


@njit(cache=True, parallel=True)
def heun_step(
    x, dw, G, h, escaped,
    dcoef, dexp, dcomp, hcoef, hexp,
    level, stab_fraction, check, status,
):
    n, d = x.shape
    r = G.shape[0]
    nblocks = (n + BLOCK - 1) // BLOCK
    for b in prange(nblocks):
        lo = b * BLOCK
        hi = min(n, lo + BLOCK)
        xi = np.empty(d)
        noise = np.empty(d)
        a0 = np.empty(d)
        a1 = np.empty(d)
        pred = np.empty(d)
        code = OK
        for i in range(lo, hi):
            if escaped[i]:
                continue
            for k in range(d):
                xi[k] = x[i, k]
                noise[k] = 0.0
            for j in range(r):
                w = dw[i, j]
                for k in range(d):
                    noise[k] += w * G[j, k]
            _eval_field(xi, dcoef, dexp, dcomp, a0)
            for k in range(d):
                pred[k] = xi[k] + h * a0[k] + noise[k]
            _eval_field(pred, dcoef, dexp, dcomp, a1)
            drift_max = 0.0
            ok = True
            for k in range(d):
                dk = 0.5 * h * (a0[k] + a1[k])
                v = xi[k] + dk + noise[k]
                pred[k] = v  # corrector state
                if not np.isfinite(v):
                    ok = False
                ad = abs(dk)
                if ad > drift_max:
                    drift_max = ad
            if not ok:
                if code < NONFINITE:
                    code = NONFINITE
                continue
            if check:
                hold = _eval_scalar(xi, hcoef, hexp)
                if hold < 0.0:
                    hold = 0.0
                if drift_max > stab_fraction * (1.0 + np.sqrt(hold)):
                    if code < UNSTABLE:
                        code = UNSTABLE
                    continue
            hnew = _eval_scalar(pred, hcoef, hexp)
            if hnew >= level:
                escaped[i] = True  # keep the last in-domain state
            else:
                for k in range(d):
                    x[i, k] = pred[k]
        status[b] = code
