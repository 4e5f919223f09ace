"""Randomized convex-polytope domains: sphere sampling, hull membership
by a small two-phase simplex, and facet transversality to a fixed
direction in dimensions 2 and 3.

The construction certifies, empirically, that a moderate number of
random sphere points yields a polytope that sandwiches a sublevel set
and whose facets all meet a chosen noise direction transversally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.random import Generator, Philox

from . import rng as _rng

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class PolytopeSample:
    dim: int
    radius: float
    vertices: np.ndarray  # (N, dim), each at distance `radius` from 0
    seed: int

    def __post_init__(self):
        norms = np.linalg.norm(self.vertices, axis=1)
        if np.abs(norms - self.radius).max() > 1e-12 * max(1.0, self.radius):
            raise ValueError("vertices are not on the sphere")

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim, "radius": self.radius, "seed": self.seed,
                "n_vertices": len(self.vertices),
                "vertices": self.vertices.tolist(),
            }
        )


def sample_polytope(d: int, S: float, N: int, seed: int) -> PolytopeSample:
    """N i.i.d. points uniform on the sphere of radius S (Gaussian trick)."""
    if d < 2:
        raise ValueError("need dimension >= 2")
    if N < d + 1:
        raise ValueError(f"need at least d + 1 = {d + 1} vertices, got {N}")
    g = Generator(Philox(key=[_rng.derive_seed(seed, "polytope"), 0]))
    pts = g.standard_normal((N, d))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return PolytopeSample(dim=d, radius=float(S), vertices=S * pts, seed=seed)


# ---------------------------------------------------------------------------
# dense two-phase simplex for the convex-combination feasibility LP


def _simplex_phase(T: np.ndarray, basis: list[int], n_real: int, max_iter: int):
    """Minimize the last row of tableau T with Bland's rule; in place."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        # entering: smallest index with negative reduced cost
        enter = -1
        for j in range(T.shape[1] - 1):
            if T[-1, j] < -FEAS_TOL:
                enter = j
                break
        if enter < 0:
            return True
        # ratio test, Bland tie-break on smallest basis index
        best = -1
        best_ratio = np.inf
        for i in range(m):
            if T[i, enter] > FEAS_TOL:
                ratio = T[i, -1] / T[i, enter]
                if ratio < best_ratio - FEAS_TOL or (
                    abs(ratio - best_ratio) <= FEAS_TOL
                    and (best < 0 or basis[i] < basis[best])
                ):
                    best, best_ratio = i, ratio
        if best < 0:
            return True  # unbounded; cannot happen for our bounded feasibility LP
        piv = T[best, enter]
        T[best] /= piv
        for i in range(T.shape[0]):
            if i != best and T[i, enter] != 0.0:
                T[i] -= T[i, enter] * T[best]
        basis[best] = enter
    raise RuntimeError("simplex cycling guard exceeded")


def hull_contains(P: PolytopeSample, query: Sequence[float]) -> bool:
    """Is `query` a convex combination of the vertices?  Two-phase simplex
    on sum_i lam_i xi_i = q, sum_i lam_i = 1, lam >= 0."""
    q = np.asarray(query, dtype=float)
    if q.shape != (P.dim,):
        raise ValueError("query dimension mismatch")
    N = len(P.vertices)
    m = P.dim + 1
    A = np.vstack([P.vertices.T, np.ones(N)])
    b = np.concatenate([q, [1.0]])
    # flip rows to make b nonnegative, add artificials
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0
    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = A
    T[:m, N : N + m] = np.eye(m)
    T[:m, -1] = b
    # phase-1 objective: sum of artificials, priced out over the basis
    T[-1, :] = 0.0
    for i in range(m):
        T[-1, : N + m] -= T[i, : N + m]
        T[-1, -1] -= T[i, -1]
    T[-1, N : N + m] += 1.0  # artificials carry unit cost and start basic
    basis = list(range(N, N + m))
    _simplex_phase(T, basis, N, max_iter=20000)
    return bool(-T[-1, -1] <= FEAS_TOL)


# ---------------------------------------------------------------------------
# facet enumeration and transversality


def _hull_facet_normals_2d(vertices: np.ndarray) -> list[np.ndarray]:
    """Edge normals of the planar convex hull by gift wrapping."""
    pts = vertices
    start = int(np.lexsort((pts[:, 1], pts[:, 0]))[0])
    hull = [start]
    current = start
    prev_dir = np.array([0.0, -1.0])
    for _ in range(len(pts) + 1):
        best = -1
        for j in range(len(pts)):
            if j == current:
                continue
            v = pts[j] - pts[current]
            nv = np.linalg.norm(v)
            if nv < 1e-14:
                continue
            if best < 0:
                best = j
                continue
            w = pts[best] - pts[current]
            cross = w[0] * v[1] - w[1] * v[0]
            if cross < -1e-14 or (
                abs(cross) <= 1e-14
                and nv > np.linalg.norm(pts[best] - pts[current])
            ):
                best = j
        hull.append(best)
        current = best
        if best == start:
            break
    normals = []
    for a, b in zip(hull, hull[1:]):
        e = pts[b] - pts[a]
        normals.append(np.array([e[1], -e[0]]))
    return normals


def _hull_facet_normals_3d(vertices: np.ndarray) -> list[np.ndarray]:
    from scipy.spatial import ConvexHull

    hull = ConvexHull(vertices)
    return [eq[:3] for eq in hull.equations]


def transversality_check(P: PolytopeSample, v: Sequence[float]):
    """(all_transverse, offending facet normals): a facet is transverse to
    v iff its normal n satisfies |n . v| > 1e-9 |n||v|."""
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) == 0:
        raise ValueError("direction must be nonzero")
    if P.dim == 2:
        normals = _hull_facet_normals_2d(P.vertices)
    elif P.dim == 3:
        normals = _hull_facet_normals_3d(P.vertices)
    else:
        raise ValueError("facet enumeration is implemented for d in {2, 3}")
    offending = []
    for nrm in normals:
        if abs(nrm @ v) <= 1e-9 * np.linalg.norm(nrm) * np.linalg.norm(v):
            offending.append(nrm)
    return len(offending) == 0, offending


def hausdorff_probe(P: PolytopeSample, n_probes: int = 1000, seed: int = 0) -> float:
    """Estimate the Hausdorff gap between the hull and its sphere by
    probing boundary directions: max over probes of (S - support radius)."""
    g = Generator(Philox(key=[_rng.derive_seed(seed, "probe"), 1]))
    dirs = g.standard_normal((n_probes, P.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    # support function of the hull in each direction
    support = (dirs @ P.vertices.T).max(axis=1)
    return float((P.radius - support).max())


def regular_simplex(d: int) -> np.ndarray:
    """d + 1 unit vectors forming a regular simplex centered at 0."""
    pts = np.eye(d + 1)
    centered = pts - pts.mean(axis=0)
    # project to d dimensions via QR of the centered coordinates
    q, _ = np.linalg.qr(centered.T)
    proj = centered @ q[:, :d]
    return proj / np.linalg.norm(proj, axis=1, keepdims=True)


def barycentric_contains(simplex: np.ndarray, query: np.ndarray, tol: float = 1e-9) -> bool:
    """Exact membership test for a simplex via barycentric coordinates."""
    d = simplex.shape[1]
    A = np.vstack([simplex.T, np.ones(len(simplex))])
    b = np.concatenate([query, [1.0]])
    lam = np.linalg.solve(A, b)
    return bool((lam >= -tol).all())
