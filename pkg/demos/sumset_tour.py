#!/usr/bin/env python3
"""Sumset machinery behind the fixed-time minorization argument.

Three exact computations: the measure bound that turns an integral lower
bound into a pointwise floor on a fat set; interval-union sumsets and the
explicit fold count that forces a unit interval; and integer sumsets with
their consecutive-block growth.
"""

from fractions import Fraction as F

from minorlab.markovkit import (
    IntervalSet,
    IntSet,
    lev_block,
    lev_min_n,
    lower_bound_set,
    steinhaus_growth,
    steinhaus_n,
    steinhaus_verify,
)

print("== integral + sup bound => pointwise floor on a fat set ==")
f = [F(3, 2), F(1, 4), F(2), F(0), F(1)]
w = [F(1, 5)] * 5
thr, bound, idx = lower_bound_set(f, w, c=F(1, 2), C=F(2), K=F(2))
print(f"  threshold {thr}, guaranteed measure {bound}, set indices {idx}")

print("\n== unit interval inside an n-fold interval sumset ==")
A = IntervalSet.of([(0, F(1, 8)), (F(5, 4), F(11, 8)), (F(5, 2), F(23, 8))])
eta, L = A.measure(), 3
n = steinhaus_n(eta, L)
print(f"  measure {eta}, L = {L}, folds n = {n}")
lo, hi = steinhaus_verify(A, n)
print(f"  unit interval found: [{lo}, {hi}]")
print("  growth of the component count (it collapses fast):")
for row in steinhaus_growth(A, 16):
    print(f"    k={row['k']:>3}  components={row['components']:>2}  measure={row['measure']:.3f}")

print("\n== integer sumsets: blocks of consecutive integers ==")
B = IntSet.of([0, 1, 5])
n = lev_min_n(B)
s, run, hyp = lev_block(B, n)
print(f"  B = {B.values}, minimal n = {n}, hypotheses ok = {hyp}")
print(f"  nB = {s.values}")
print(f"  longest consecutive run = {run} (bound n(#B-1) = {n * (len(B) - 1)})")
