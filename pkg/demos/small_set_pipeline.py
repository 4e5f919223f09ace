#!/usr/bin/env python3
"""Constructive small set -> fixed-time floor on a finite chain.

Builds a 50-state lazy reflected walk with a little uniform jitter,
checks the petite condition exactly, then runs the full pipeline: hub
search, threshold sets, pigeonhole return time, good times, integer
block, and the final verified (t0, lambda).  Every inequality along the
way is exact rational arithmetic.
"""

import json
from fractions import Fraction as F

from minorlab.markovkit import KernelFamily, small_set_pipeline

n = 50
theta = F(1, 1000)
Q = [[F(0)] * n for _ in range(n)]
for i in range(n):
    Q[i][i] += F(1, 2)
    Q[i][max(0, i - 1)] += F(1, 4)
    Q[i][min(n - 1, i + 1)] += F(1, 4)
Q = [[(1 - theta) * Q[i][j] + theta * F(1, n) for j in range(n)] for i in range(n)]
levels = tuple(F((i - 24) ** 2, 100) for i in range(n))

fam = KernelFamily(Q=Q, times=tuple(range(1, 11)), levels=levels)
res = small_set_pipeline(fam, R=F(3), c_R=F(1, 10000), C_R=F(1))

print(f"sublevel set: {len(res.trace['H_R_states'])} states")
print(f"hub: {res.trace['hub']}")
print(f"small set E = {res.E}, t* = {res.t_star}, delta = {res.delta}")
print(f"good times: {res.trace['good_times']}")
print(f"block route: {json.dumps({k: str(v) for k, v in res.trace['lev'].items()})}")
print(f"verified floor: p_t0(x, y) >= {res.lam} for all x, y below level R at t0 = {res.t0}")
print(f"verified = {res.verified}")
