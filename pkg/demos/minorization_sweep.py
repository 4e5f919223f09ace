#!/usr/bin/env python3
"""Small-noise minorization sweep at demo scale.

Estimates lambda(eps) = min over (start, cell) of the rescaled
transition density over the sublevel set H < R, for several eps, and
compares against the exact Gaussian-law target.  The claim under test:
the floor does not degrade as eps -> 0 (here: ratio of the per-eps
floors stays small).

Demo scale: N = 10^5 per (eps, start) finishes in a few minutes.  The
acceptance suite runs the same configuration at N = 10^6.
"""

import time

from minorlab.density import GridSpec, lattice_starts, minorization_sweep, oracle_minorization_sweep
from minorlab.models import build_model

model = build_model("langevin", {"n": 1})
grid = GridSpec(box=((-4, 4), (-4, 4)), cells=(8, 8), R=4.0)
starts = lattice_starts(model, 4.0, scale=0.5)
eps_list = [0.4, 0.2, 0.1, 0.05]

print("exact Gaussian-law target:")
orc = oracle_minorization_sweep(model, 4.0, 2.0, eps_list, grid, starts=starts)
for eps in eps_list:
    print(f"  eps={eps:<5} lambda={orc['lambda'][eps]:.4g}")
print(f"  ratio = {orc['ratio']:.3f}\n")

print("Monte Carlo sweep (N = 1e5 per start):")
t0 = time.time()
rep = minorization_sweep(
    model, 4.0, 2.0, eps_list, grid, n_traj=100_000, seed=11,
    starts=starts, dt_phys=lambda e: 0.3 * e,
)
for eps in eps_list:
    print(
        f"  eps={eps:<5} lambda={rep.lambda_hat[eps]:.4g} "
        f"ci_low={rep.lambda_ci_low[eps]:.4g}"
    )
print(
    f"  ratio = {rep.ratio:.3f}, verdict = {'PASS' if rep.passed else 'FAIL'} "
    f"({time.time() - t0:.0f}s)"
)
