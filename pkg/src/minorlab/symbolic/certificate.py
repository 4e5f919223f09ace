"""Numerical certification of the uniform bracket-spanning condition.

The bracket list is enumerated breadth-first as right-nested words
(j1, ..., jk): index 0 is the drift -eps*Z + Z0 and indices 1..r are the
noise fields.  Depth-1 entries are noise fields only; the drift appears
only inside brackets.  Every surviving bracket direction is evaluated on
a grid of (state, eps) pairs and the smallest singular value of the
direction matrix is recorded; the certificate passes when the global
floor clears a threshold and the per-eps floors stay within a ratio
bound, which is the working proxy for eps-uniformity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .poly import PolyExpr, VectorField, lie_bracket

DEFAULT_THRESHOLD = Fraction(1, 10**6)
DEFAULT_RATIO_BOUND = Fraction(1000)
DEFAULT_EPS_GRID = (
    Fraction(1, 1000),
    Fraction(1, 100),
    Fraction(1, 10),
    Fraction(999, 1000),
)


@dataclass(frozen=True)
class BracketNode:
    """One bracket direction, reproducible from its word."""

    word: tuple[int, ...]
    field: VectorField

    @property
    def depth(self) -> int:
        return len(self.word)

    @property
    def smoothing_order(self) -> Fraction:
        """Formal smoothing order of the word: 1/s = sum over letters of
        1/s_j with s_0 = 1/2 for the drift and s_j = 1 for noise.  Recorded
        as metadata only; no estimate consumes it."""
        return Fraction(1, sum(2 if j == 0 else 1 for j in self.word))

    def recompute(self, generators: list[VectorField]) -> VectorField:
        """Re-derive the field from the word (certificate integrity)."""
        out = generators[self.word[-1]]
        for j in reversed(self.word[:-1]):
            out = lie_bracket(generators[j], out)
        return out


@dataclass
class HormanderCertificate:
    brackets: list[BracketNode]
    eps_grid: list[Fraction]
    x_samples: list[tuple]
    min_singular: np.ndarray  # shape (len(eps_grid), len(x_samples))
    uniform_floor: float
    per_eps_floor: np.ndarray
    floor_ratio: float
    threshold: float
    ratio_bound: float
    max_depth: int
    passed: bool
    deficiencies: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "brackets": [list(b.word) for b in self.brackets],
                "smoothing_orders": [str(b.smoothing_order) for b in self.brackets],
                "eps_grid": [float(e) for e in self.eps_grid],
                "floor_matrix": self.min_singular.tolist(),
                "verdict": "PASS" if self.passed else "FAIL",
                "uniform_floor": self.uniform_floor,
                "per_eps_floor": self.per_eps_floor.tolist(),
                "floor_ratio": self.floor_ratio,
                "threshold": self.threshold,
                "ratio_bound": self.ratio_bound,
                "max_depth": self.max_depth,
                "deficiencies": self.deficiencies,
            },
            indent=2,
        )


def _sign_normalized(X: VectorField) -> VectorField:
    """Flip the sign so the first nonzero coefficient is positive.

    Bracket words often differ only by orientation ([X,Y] vs [Y,X]);
    opposite directions carry no extra spanning information.
    """
    for comp in X.components:
        for key in sorted(comp.terms):
            if comp.terms[key].sign() < 0:
                return -X
            return X
    return X


def enumerate_brackets(
    drift: VectorField, noises: list[VectorField], max_depth: int
) -> list[BracketNode]:
    """Breadth-first bracket words, deduplicated up to sign."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    generators = [drift] + list(noises)
    seen: set[VectorField] = set()
    out: list[BracketNode] = []
    level: list[BracketNode] = []
    for j, Z in enumerate(noises, start=1):
        if Z.is_zero():
            continue
        node = BracketNode((j,), Z)
        canon = _sign_normalized(Z)
        if canon not in seen:
            seen.add(canon)
            out.append(node)
        level.append(node)
    for _ in range(1, max_depth):
        nxt: list[BracketNode] = []
        for node in level:
            for j, G in enumerate(generators):
                if G.is_zero():
                    continue
                f = lie_bracket(G, node.field)
                if f.is_zero():
                    continue
                child = BracketNode((j,) + node.word, f)
                nxt.append(child)
                canon = _sign_normalized(f)
                if canon not in seen:
                    seen.add(canon)
                    out.append(child)
        level = nxt
    return out


def hormander_certificate(
    model,
    max_depth: int,
    eps_grid=DEFAULT_EPS_GRID,
    x_samples=None,
    threshold=DEFAULT_THRESHOLD,
    ratio_bound=DEFAULT_RATIO_BOUND,
) -> HormanderCertificate:
    """Certify the bracket condition for a model over a (x, eps) grid.

    The drift entering brackets is -eps*Z + Z0 with eps formal, per the
    ordered family (drift; Z_1; ...; Z_r).
    """
    eps_grid = [Fraction(e) for e in eps_grid]
    if not eps_grid or any(not (0 < e < 1) for e in eps_grid):
        raise ValueError("eps grid must be nonempty with entries in (0, 1)")
    if x_samples is None:
        raise ValueError("empty sample set")
    x_samples = [tuple(float(v) for v in x) for x in x_samples]
    if not x_samples:
        raise ValueError("empty sample set")

    d = model.d
    eps_poly = PolyExpr.eps(d)
    drift = model.Z0 - model.Z.scale_poly(eps_poly)
    nodes = enumerate_brackets(drift, list(model.Zs), max_depth)
    evaluators = [n.field.compile() for n in nodes]

    pts = np.array(x_samples, dtype=float)
    floors = np.empty((len(eps_grid), len(x_samples)))
    deficiencies: list[dict] = []
    thr = float(threshold)
    for ei, eps in enumerate(eps_grid):
        e = float(eps)
        cols = [ev(pts, e) for ev in evaluators]  # each (n_samples, d)
        mats = np.stack(cols, axis=-1)  # (n_samples, d, n_brackets)
        for xi in range(len(x_samples)):
            sv = np.linalg.svd(mats[xi], compute_uv=False)
            smin = float(sv[d - 1]) if sv.size >= d else 0.0
            floors[ei, xi] = smin
            if smin <= thr:
                rank = int(np.sum(sv > thr * max(1.0, float(sv[0]) if sv.size else 1.0)))
                deficiencies.append(
                    {"eps": float(eps), "x_index": xi, "x": list(pts[xi]), "rank": rank}
                )

    per_eps = floors.min(axis=1)
    uniform_floor = float(per_eps.min())
    lo = float(per_eps.min())
    ratio = float(per_eps.max() / lo) if lo > 0 else float("inf")
    passed = uniform_floor > thr and ratio <= float(ratio_bound)
    return HormanderCertificate(
        brackets=nodes,
        eps_grid=eps_grid,
        x_samples=[tuple(p) for p in x_samples],
        min_singular=floors,
        uniform_floor=uniform_floor,
        per_eps_floor=per_eps,
        floor_ratio=ratio,
        threshold=thr,
        ratio_bound=float(ratio_bound),
        max_depth=max_depth,
        passed=passed,
        deficiencies=deficiencies,
    )
