"""Exact minorization machinery on finite state spaces and interval sets.

Four independent pieces, all in rational arithmetic:

* the no-concentration bound: a function with integral >= c and sup <= C
  is >= c/(K|D|) on a set of measure >= c(1-1/K)/(C - c/(K|D|));
* Minkowski sumsets of closed rational interval unions, with the explicit
  n = ceil(20L/eta) + 2 folds that force a unit interval into nA;
* integer sumsets and the consecutive-block bound n(M-1) for sets not
  trapped in a coarser arithmetic progression;
* a constructive small-set pipeline for discrete-time kernel families:
  petite check, transition-threshold search, Chapman-Kolmogorov
  composition to a verified (t0, lambda) with the full derivation trace.

States carry the measure 1/n_states, and kernels are treated as densities
against it (density = n * matrix entry), so the continuum constants port
verbatim.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, gcd, inf
from typing import Optional, Sequence


# ---------------------------------------------------------------------------
# no-concentration (integral + sup bound => pointwise floor on a fat set)


def lower_bound_set(
    f: Sequence[Fraction],
    weights: Sequence[Fraction],
    c: Fraction,
    C: Fraction,
    K: Fraction,
) -> tuple[Fraction, Fraction, list[int]]:
    """Return (threshold, guaranteed measure, indices of {f >= threshold}).

    Requires sum(f*w) >= c, max f <= C and K >= 2.  The returned set's
    measure provably meets c(1 - 1/K) / (C - c/(K|D|)); both sides are
    computed exactly and the guarantee is re-checked before returning.
    """
    f = [Fraction(v) for v in f]
    weights = [Fraction(w) for w in weights]
    c, C, K = Fraction(c), Fraction(C), Fraction(K)
    if len(f) != len(weights) or not f:
        raise ValueError("f and weights must be nonempty and aligned")
    if any(v < 0 for v in f) or any(w < 0 for w in weights):
        raise ValueError("f and weights must be nonnegative")
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    total = sum(w for w in weights)
    if total <= 0:
        raise ValueError("the measure space is trivial")
    integral = sum(v * w for v, w in zip(f, weights))
    if integral < c:
        raise ValueError(f"integral {integral} is below the stated lower bound {c}")
    if max(f) > C:
        raise ValueError(f"sup {max(f)} exceeds the stated upper bound {C}")
    threshold = c / (K * total)
    bound = (c * (1 - 1 / K)) / (C - c / (K * total))
    idx = [i for i, v in enumerate(f) if v >= threshold]
    measure = sum(weights[i] for i in idx)
    assert measure >= bound, "no-concentration bound violated (impossible)"
    return threshold, bound, idx


# ---------------------------------------------------------------------------
# interval unions and the quantitative Steinhaus constant


@dataclass(frozen=True)
class IntervalSet:
    """Sorted union of disjoint closed intervals with rational endpoints."""

    intervals: tuple[tuple[Fraction, Fraction], ...]

    @staticmethod
    def of(pairs) -> "IntervalSet":
        ivs = sorted((Fraction(a), Fraction(b)) for a, b in pairs)
        for a, b in ivs:
            if b < a:
                raise ValueError(f"interval [{a}, {b}] is inverted")
        merged: list[list[Fraction]] = []
        for a, b in ivs:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return IntervalSet(tuple((a, b) for a, b in merged))

    def is_empty(self) -> bool:
        return not self.intervals

    def measure(self) -> Fraction:
        return sum((b - a for a, b in self.intervals), Fraction(0))

    def __add__(self, other: "IntervalSet") -> "IntervalSet":
        """Exact Minkowski sum."""
        if self.is_empty() or other.is_empty():
            raise ValueError("Minkowski sum of an empty interval set")
        return IntervalSet.of(
            (a1 + a2, b1 + b2)
            for a1, b1 in self.intervals
            for a2, b2 in other.intervals
        )

    def nfold(self, n: int) -> "IntervalSet":
        """n-fold sumset by binary doubling."""
        if n < 1:
            raise ValueError("n must be >= 1")
        acc = None
        base = self
        while n:
            if n & 1:
                acc = base if acc is None else acc + base
            n >>= 1
            if n:
                base = base + base
        return acc

    def longest_component(self) -> tuple[Fraction, Fraction]:
        return max(self.intervals, key=lambda iv: iv[1] - iv[0])


def interval_sumset(A: IntervalSet, B: IntervalSet) -> IntervalSet:
    return A + B


def steinhaus_n(eta: Fraction, L: int) -> int:
    """Fold count ceil(20 L / eta) + 2 that suffices for interval unions."""
    eta = Fraction(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    if L < 1:
        raise ValueError("L must be a positive integer")
    if eta > L:
        raise ValueError("a subset of [0, L] cannot have measure above L")
    return ceil(Fraction(20 * L) / eta) + 2


def steinhaus_verify(A: IntervalSet, n: int) -> tuple[Fraction, Fraction]:
    """Compute nA exactly and return a closed unit interval inside it."""
    big = A.nfold(n)
    a, b = big.longest_component()
    if b - a < 1:
        raise AssertionError(
            "no unit interval found in the n-fold sumset; this would refute "
            "the sumset bound"
        )
    return (a, a + 1)


def steinhaus_growth(A: IntervalSet, n: int) -> list[dict]:
    """Component count and measure of kA for k = 1..n (doubling ladder)."""
    rows = []
    acc = A
    k = 1
    while True:
        rows.append(
            {"k": k, "components": len(acc.intervals), "measure": float(acc.measure())}
        )
        if k >= n:
            break
        if 2 * k <= n:
            acc = acc + acc
            k *= 2
        else:
            acc = acc + A.nfold(n - k)
            k = n
    return rows


# ---------------------------------------------------------------------------
# integer sumsets (consecutive-block bound)


@dataclass(frozen=True)
class IntSet:
    values: tuple[int, ...]

    @staticmethod
    def of(vals) -> "IntSet":
        vs = sorted(set(int(v) for v in vals))
        if any(v < 0 for v in vs):
            raise ValueError("values must be nonnegative")
        return IntSet(tuple(vs))

    def __len__(self):
        return len(self.values)


def _nfold_intset(vals: tuple[int, ...], n: int) -> tuple[int, ...]:
    # repeated set addition; sizes are desk-scale
    current = set(vals)
    for _ in range(n - 1):
        current = {a + v for a in current for v in vals}
    return tuple(sorted(current))


def lev_block(B: IntSet, n: int) -> tuple[IntSet, int, bool]:
    """n-fold sumset of B, its longest run, and the hypothesis verdict.

    Hypotheses (reported, never required): after shifting min(B) to 0 with
    span ell = max - min, #B >= 3, the differences have gcd 1, and
    n >= 2*ceil((ell - 1)/(#B - 2)).  When they hold, the sumset contains
    a block of at least n*(#B - 1) consecutive integers.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    vals = B.values
    if not vals:
        raise ValueError("empty integer set")
    if len(vals) == 1:
        only = vals[0] * n
        return IntSet.of([only]), 1, False
    base = vals[0]
    shifted = tuple(v - base for v in vals)
    ell = max(shifted)
    M = len(vals)
    g = 0
    for v in shifted:
        g = gcd(g, v)
    hyp = M >= 3 and g == 1 and n >= 2 * ceil((ell - 1) / (M - 2))
    sumvals = _nfold_intset(shifted, n)
    # longest run of consecutive integers
    best = run = 1
    for a, b in zip(sumvals, sumvals[1:]):
        run = run + 1 if b == a + 1 else 1
        best = max(best, run)
    out = IntSet.of(v + n * base for v in sumvals)
    if hyp:
        assert best >= n * (M - 1), "consecutive-block bound violated (impossible)"
    return out, best, hyp


def lev_min_n(B: IntSet) -> int:
    """Smallest fold count admitted by the hypotheses."""
    vals = B.values
    if len(vals) < 3:
        raise ValueError("need at least 3 elements")
    ell = max(vals) - min(vals)
    return max(2 * ceil((ell - 1) / (len(vals) - 2)), 1)


# ---------------------------------------------------------------------------
# kernel families and the small-set pipeline


class PipelineError(RuntimeError):
    pass


@dataclass
class KernelFamily:
    """Discrete-time family P_t = Q^t from a one-step stochastic matrix.

    `times` is the observation window used by the petite condition;
    arbitrary composite times remain available exactly through powers of
    the one-step kernel.  `levels` assigns each state its energy value,
    which defines the discrete sublevel sets.
    """

    Q: list[list[Fraction]]
    times: tuple[int, ...]
    levels: tuple[Fraction, ...]
    _powers: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = len(self.Q)
        if any(len(row) != n for row in self.Q):
            raise ValueError("kernel matrix must be square")
        if len(self.levels) != n:
            raise ValueError("need one level per state")
        if not self.times or any(t < 1 for t in self.times):
            raise ValueError("times must be integers >= 1")
        self.times = tuple(sorted(set(self.times)))
        for i, row in enumerate(self.Q):
            if any(p < 0 for p in row):
                raise ValueError(f"negative entry in row {i}")
            s = sum(row)
            if abs(float(s - 1)) > 1e-12:
                raise ValueError(f"row {i} sums to {float(s)}, not 1")

    @property
    def n_states(self) -> int:
        return len(self.Q)

    def P(self, t: int) -> list[list[Fraction]]:
        """Exact t-step kernel Q^t (cached)."""
        if t < 1:
            raise ValueError("t must be >= 1")
        if t in self._powers:
            return self._powers[t]
        if t == 1:
            self._powers[1] = self.Q
            return self.Q
        half = self.P(t // 2)
        out = _matmul(half, half)
        if t % 2:
            out = _matmul(out, self.Q)
        self._powers[t] = out
        return out

    def sublevel_states(self, R) -> list[int]:
        R = Fraction(R)
        return [i for i, lv in enumerate(self.levels) if lv < R]

    @staticmethod
    def from_csv(path: str, times: Sequence[int], levels: Sequence) -> "KernelFamily":
        """Load (t, i, j, p) rows; the t = 1 block defines the kernel.

        Blocks at other times, if present, are checked against the exact
        powers of the one-step kernel to 1e-9.
        """
        blocks: dict[int, dict[tuple[int, int], Fraction]] = {}
        n = 0
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            if [h.strip() for h in header] != ["t", "i", "j", "p"]:
                raise ValueError("kernel CSV must have header t,i,j,p")
            for row in rd:
                t, i, j = int(row[0]), int(row[1]), int(row[2])
                blocks.setdefault(t, {})[(i, j)] = Fraction(row[3])
                n = max(n, i + 1, j + 1)
        if 1 not in blocks:
            raise ValueError("kernel CSV must include the t = 1 block")
        Q = [[blocks[1].get((i, j), Fraction(0)) for j in range(n)] for i in range(n)]
        fam = KernelFamily(Q=Q, times=tuple(times), levels=tuple(Fraction(v) for v in levels))
        for t, entries in blocks.items():
            if t == 1:
                continue
            Pt = fam.P(t)
            for (i, j), p in entries.items():
                if abs(float(Pt[i][j] - p)) > 1e-9:
                    raise ValueError(
                        f"P_{t}[{i},{j}] = {float(p)} is inconsistent with the "
                        f"one-step kernel power {float(Pt[i][j])}"
                    )
        return fam


def _matmul(A, B):
    n = len(A)
    Bt = list(zip(*B))
    return [[sum(a * b for a, b in zip(row, col)) for col in Bt] for row in A]


@dataclass
class SmallSetResult:
    E: list[int]
    t_star: int
    delta: Fraction
    t0: int
    lam: Fraction
    verified: bool
    trace: dict

    def to_json(self) -> str:
        def enc(v):
            if isinstance(v, Fraction):
                return str(v)
            if isinstance(v, dict):
                return {k: enc(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [enc(x) for x in v]
            return v

        return json.dumps(
            {
                "E": self.E,
                "t_star": self.t_star,
                "delta": str(self.delta),
                "t0": self.t0,
                "lambda": str(self.lam),
                "lambda_float": float(self.lam),
                "verified": self.verified,
                "trace": enc(self.trace),
            },
            indent=2,
        )


def petite_check(
    k: KernelFamily, R, c_R: Fraction, C_R: Fraction
) -> tuple[list[int], Optional[tuple]]:
    """Exact petite condition over the discrete sublevel set.

    Needs min over pairs of sum_{t in times} P_t(x, y) >= c_R and a max
    entry bound C_R.  Returns (states, witness) where witness is the
    offending pair if the condition fails.
    """
    states = k.sublevel_states(R)
    if not states:
        raise PipelineError(f"no states below level {R}")
    c_R, C_R = Fraction(c_R), Fraction(C_R)
    mats = [k.P(t) for t in k.times]
    worst = None
    for x in states:
        for y in states:
            tot = sum(m[x][y] for m in mats)
            if worst is None or tot < worst[0]:
                worst = (tot, x, y)
            for m in mats:
                if m[x][y] > C_R:
                    raise PipelineError(
                        f"entry P[{x},{y}] = {float(m[x][y])} exceeds C_R"
                    )
    if worst[0] < c_R:
        return states, (worst[1], worst[2], worst[0])
    return states, None


def small_set_pipeline(k: KernelFamily, R, c_R, C_R) -> SmallSetResult:
    """Constructive small set and verified fixed-time minorization.

    Route: petite check; best (t, tau, u, v, w) transition threshold;
    E1/E2 threshold sets around the hub state v; a pigeonhole time t2
    giving E subset of E2 with P_{t2}(., y*) bounded below; good times by
    the no-concentration bound; integer-sumset block to reach one fixed
    t0 for every (x, y); final exact verification by matrix power.  The
    returned (t0, lambda) is the smallest verified pair at or below the
    derived t0; verification failure raises (it would falsify the route).
    """
    c_R, C_R = Fraction(c_R), Fraction(C_R)
    states, witness = petite_check(k, R, c_R, C_R)
    if witness:
        x, y, tot = witness
        raise PipelineError(
            f"petite condition fails: sum_t P_t({x},{y}) = {float(tot)} < c_R"
        )
    n = k.n_states
    w_state = Fraction(1, n)  # uniform reference measure
    T = list(k.times)
    nt = len(T)
    trace: dict = {"H_R_states": states, "times": T}

    # -- step 1: hub search -------------------------------------------------
    best = None
    for t in T:
        Pt = k.P(t)
        for tau in T:
            Ptau = k.P(tau)
            for u in states:
                for v in states:
                    if Pt[u][v] == 0:
                        continue
                    for w in states:
                        val = min(Pt[u][v], Ptau[v][w])
                        if best is None or val > best[0]:
                            best = (val, t, tau, u, v, w)
    # the petite bound guarantees max_t P_t(u, v) >= c_R/|T| pointwise
    floor = c_R / nt
    if best is None or best[0] < floor:
        achieved = 0 if best is None else float(best[0])
        raise PipelineError(
            f"transition-threshold search failed: best {achieved} below {float(floor)}"
        )
    delta4, t, tau, u, v, w = best
    trace["hub"] = {"t": t, "tau": tau, "u": u, "v": v, "w": w, "delta4": delta4}

    # -- step 2: threshold sets around the hub ------------------------------
    Pt, Ptau = k.P(t), k.P(tau)
    E1 = [x for x in states if Pt[x][v] >= delta4]
    E2 = [z for z in states if Ptau[v][z] >= delta4]
    t1 = t + tau
    delta2 = delta4 * delta4  # entrywise floor of P_{t1} on E1 x E2
    trace["E1"], trace["E2"], trace["t1"], trace["delta2"] = E1, E2, t1, delta2

    # -- step 3: pigeonhole a common return time into E1 --------------------
    y_star = max(E1, key=lambda x0: Pt[x0][v])
    best_t2 = None
    for t2 in T:
        P2 = k.P(t2)
        cnt = [x for x in E2 if P2[x][y_star] >= c_R / nt]
        if best_t2 is None or len(cnt) > len(best_t2[1]):
            best_t2 = (t2, cnt)
    t2, E = best_t2
    if not E:
        # petite guarantees each x in E2 has some good time; pigeonhole keeps
        # at least |E2|/|T| of them at the best single time
        raise PipelineError("no common return time into the hub set")
    delta3 = c_R / nt
    t_star = t2 + t1
    # entrywise floor of P_{t_star} on E x E via y_star and E1 x E2
    delta_derived = delta3 * delta2
    Pstar = k.P(t_star)
    delta = min(Pstar[x][z] for x in E for z in E)
    if delta < delta_derived:
        raise AssertionError("composition floor violated (impossible)")
    trace["t2"], trace["y_star"], trace["delta3"] = t2, y_star, delta3
    trace["E"], trace["t_star_derived"] = E, t_star
    trace["delta_derived"], trace["delta_verified"] = delta_derived, delta

    # tighten t_star by scanning for the earliest time meeting delta_derived
    for ts in range(1, t_star + 1):
        Ps = k.P(ts)
        m = min(Ps[x][z] for x in E for z in E)
        if m >= delta_derived:
            t_star, delta = ts, m
            break
    trace["t_star"] = t_star

    # -- step 4: good times (no-concentration on the time average) ----------
    mass_E = Fraction(len(E), n)
    fvals = []
    for tt in T:
        Ptt = k.P(tt)
        # F(t) = integral of the density over E x E under the uniform measure
        fvals.append(sum(Ptt[x][z] for x in E for z in E) * w_state)
    # pointwise petite gives sum_t F(t) >= c_R |E|^2 / n; F(t) <= |E|/n
    c_int = c_R * Fraction(len(E) ** 2, n)
    C_int = mass_E
    thr, bound, idx = lower_bound_set(fvals, [Fraction(1)] * nt, c_int, C_int, Fraction(2))
    U = [T[i] for i in idx]
    # entrywise floor on E x E at time t in U, two t_star bridges around it:
    # P_{t + 2 t_star}(x, z) >= delta^2 * sum_{E x E} P_t >= delta^2 * n * thr ...
    # in matrix units: sum over (y1, y2) in E^2 of delta * P_t(y1, y2) * delta
    delta_S = min(
        delta * delta * sum(k.P(tt)[x][z] for x in E for z in E) for tt in U
    )
    S_times = [tt + 2 * t_star for tt in U]
    trace["good_times"] = U
    trace["good_times_threshold"] = thr
    trace["good_times_measure_bound"] = bound
    trace["S_times"], trace["delta_S"] = S_times, delta_S

    # -- step 5: block of reachable bridge durations -------------------------
    span = 2 * (max(T) - min(T))
    base = min(S_times)
    B = IntSet.of(st - base for st in S_times)
    if len(B) >= 3 and len(set(B.values)) >= 3:
        n_fold = lev_min_n(B)
        while True:
            sumset, run, hyp = lev_block(B, n_fold)
            if hyp and run >= span + 1:
                break
            n_fold += 1
            if n_fold > 64:
                sumset = None
                break
    else:
        sumset = None
    if sumset is not None:
        # locate the block inside the shifted sumset
        vals = sumset.values
        run_start = run_len = best_start = best_len = None
        best_start, best_len = vals[0], 1
        run_start, run_len = vals[0], 1
        for a, b in zip(vals, vals[1:]):
            if b == a + 1:
                run_len += 1
            else:
                run_start, run_len = b, 1
            if best_len < run_len:
                best_start, best_len = run_start, run_len
        # chain: x -(t_x)-> e0, n_fold bridges within E, e1 -(t_y)-> y, with
        # fixed e0, e1 in E; entry and exit each contribute c_R/|T|
        block_lo = best_start + n_fold * base
        t0_derived = block_lo + 2 * max(T)
        lam_derived = (
            (c_R / nt) ** 2
            * delta_S**n_fold
            * Fraction(len(E)) ** (n_fold - 1)
        )
        trace["lev"] = {
            "n_fold": n_fold, "block_start": block_lo, "block_length": best_len,
            "t0_derived": t0_derived, "lambda_derived": lam_derived,
        }
    else:
        # degenerate good-time sets: fall back to a bounded direct scan
        t0_derived = 4 * (2 * t_star + max(T))
        lam_derived = Fraction(0)
        trace["lev"] = {"n_fold": None, "t0_derived": t0_derived, "route": "scan"}

    # -- step 6: final verification by exact matrix power -------------------
    found = None
    for tt in range(1, t0_derived + 1):
        Ptt = k.P(tt)
        m = min(Ptt[x][y] for x in states for y in states)
        if m > 0 and m >= lam_derived:
            found = (tt, m)
            break
    if found is None:
        raise AssertionError(
            "no verified (t0, lambda) at or below the derived horizon; this "
            "would falsify the composition route"
        )
    t0, lam = found
    check = min(k.P(t0)[x][y] for x in states for y in states)
    verified = check == lam and lam > 0
    if not verified:
        raise AssertionError("final verification mismatch (impossible)")
    return SmallSetResult(
        E=E, t_star=t_star, delta=delta, t0=t0, lam=lam, verified=True, trace=trace
    )
