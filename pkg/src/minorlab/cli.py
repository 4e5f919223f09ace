"""Config-driven experiment runner.

Subcommands:
    minorlab run <config.cfg>     execute one task, write its artifacts
    minorlab report <output_dir>  merge task JSONs into a summary
    minorlab print-schema         dump the config schema as JSON

Exit codes: 0 on success, 2 when an assumption or verification check
fails (a JSON failure report is still written), 1 on usage errors.
Output files are written atomically (temp file + rename).  The worker
pool size is capped by the MINORLAB_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import rng
from .config import ConfigError, ExperimentConfig, load_config, schema_json
from .models import AssumptionError, ModelError, build_model, check_assumptions
from .symbolic import hormander_certificate
from .symbolic.certificate import DEFAULT_EPS_GRID, DEFAULT_THRESHOLD


def atomic_write(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_path(path: str):
    """Context that yields a temp path and renames it into place on success."""

    class _Ctx:
        def __enter__(self):
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            fd, self.tmp = tempfile.mkstemp(
                dir=os.path.dirname(path) or ".", suffix=".tmp"
            )
            os.close(fd)
            return self.tmp

        def __exit__(self, et, ev, tb):
            if et is None:
                os.replace(self.tmp, path)
            elif os.path.exists(self.tmp):
                os.unlink(self.tmp)
            return False

    return _Ctx()


def n_workers() -> int:
    cap = os.environ.get("MINORLAB_THREADS")
    if cap:
        return max(1, int(cap))
    return 1


def certificate_samples(model, R: float, n_random: int, seed: int) -> list[tuple]:
    """Axis midpoints at level R/2 plus seeded interior points of H < R.

    The axis points sit where first-order brackets degenerate for the
    cyclically-forced models, so depth thresholds are actually exercised;
    the exact origin is excluded (it needs strictly deeper words).
    """
    Hfn = model.H.compile()
    pts = []
    for i in range(model.d):
        # scale e_i to the level H = R/2 by bisection
        lo, hi = 0.0, 1.0
        e = np.zeros(model.d)
        e[i] = 1.0
        while Hfn((hi * e)[None, :])[0] < R / 2:
            hi *= 2
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if Hfn((mid * e)[None, :])[0] < R / 2:
                lo = mid
            else:
                hi = mid
        pts.append(tuple(lo * e))
        pts.append(tuple(-lo * e))
    g = np.random.default_rng(rng.derive_seed(seed, "cert-samples"))
    box = max(abs(v) for p in pts for v in p) or 1.0
    while len(pts) < 2 * model.d + n_random:
        x = g.uniform(-box, box, size=model.d)
        if Hfn(x[None, :])[0] < R:
            pts.append(tuple(x))
    return pts


# ---------------------------------------------------------------------------
# task implementations


def _build_model(cfg: ExperimentConfig):
    from dataclasses import replace

    model = build_model(cfg.model["family"], cfg.model_params())
    overrides = cfg.overrides()
    if overrides:
        model = replace(model, **overrides)
    return model


def _task_check(cfg: ExperimentConfig, out: str) -> int:
    model = _build_model(cfg)
    n_points = cfg.run.get("n_points", 1000)
    seed = cfg.run.get("seed", 0)
    try:
        rep = check_assumptions(model, n_points=n_points, seed=seed)
    except AssumptionError as exc:
        atomic_write(
            os.path.join(out, "check.json"),
            json.dumps(
                {
                    "task": "check", "model": model.name, "verdict": "FAIL",
                    "criterion": cfg.criterion,
                    "error": str(exc),
                    "witness": [str(v) for v in (exc.witness or [])],
                    "margin": None if exc.margin is None else str(exc.margin),
                },
                indent=2,
            ),
        )
        return 2
    body = json.loads(rep.to_json())
    body["task"] = "check"
    body["criterion"] = cfg.criterion
    atomic_write(os.path.join(out, "check.json"), json.dumps(body, indent=2))
    return 0


def _task_hormander(cfg: ExperimentConfig, out: str) -> int:
    model = build_model(cfg.model["family"], cfg.model_params())
    R = cfg.run.get("r_level", 1.0)
    samples = certificate_samples(
        model, R, cfg.run.get("n_samples", 8), cfg.run.get("seed", 0)
    )
    cert = hormander_certificate(
        model,
        max_depth=cfg.run.get("max_depth", 2),
        eps_grid=cfg.run.get("eps_grid", DEFAULT_EPS_GRID),
        x_samples=samples,
        threshold=cfg.run.get("threshold", DEFAULT_THRESHOLD),
    )
    body = json.loads(cert.to_json())
    body["task"] = "hormander"
    body["criterion"] = cfg.criterion
    atomic_write(os.path.join(out, "hormander.json"), json.dumps(body, indent=2))
    return 0 if cert.passed else 2


def _dt_for(cfg: ExperimentConfig, model, eps: float):
    from .density import default_dt

    if "dt_phys" in cfg.run:
        return cfg.run["dt_phys"]
    if "dt_scale" in cfg.run:
        return cfg.run["dt_scale"] * eps
    return default_dt(model)


def _task_simulate(cfg: ExperimentConfig, out: str) -> int:
    import csv

    from .sde import SimConfig, simulate_ensemble

    model = build_model(cfg.model["family"], cfg.model_params())
    eps = cfg.run["eps"]
    sim = SimConfig(
        eps=eps,
        t_end=cfg.run.get("t_end", cfg.run.get("t0", 1.0)),
        dt_phys=_dt_for(cfg, model, eps),
        n_traj=cfg.run.get("n_traj", 10000),
        seed=cfg.run.get("seed", 0),
        x0=tuple(cfg.run.get("x0", [0.0] * model.d)),
    )
    es = simulate_ensemble(model, sim)
    path = os.path.join(out, "endpoints.csv")
    with atomic_write_path(path) as tmp:
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["traj_id"] + [f"x{i + 1}" for i in range(model.d)] + ["escaped"])
            for i in range(len(es.points)):
                w.writerow(
                    [i] + [f"{v:.9g}" for v in es.points[i]] + [int(es.escaped[i])]
                )
    atomic_write(
        os.path.join(out, "simulate.json"),
        json.dumps(
            {
                "task": "simulate", "criterion": cfg.criterion,
                "model": model.name, "n_traj": sim.n_traj,
                "escaped_fraction": float(es.escaped.mean()),
                "meta": es.meta, "verdict": "PASS",
            },
            indent=2,
        ),
    )
    return 0


def _grid_from(cfg: ExperimentConfig):
    from .density import GridSpec

    return GridSpec(
        box=tuple(tuple(p) for p in cfg.run["grid_box"]),
        cells=tuple(cfg.run["grid_cells"]),
        R=cfg.run["r_level"],
    )


def _task_density(cfg: ExperimentConfig, out: str) -> int:
    from .density import estimate_density_grid

    model = build_model(cfg.model["family"], cfg.model_params())
    eps = cfg.run["eps"]
    grid = _grid_from(cfg)
    grids = estimate_density_grid(
        model,
        [tuple(cfg.run.get("x0", [0.0] * model.d))],
        eps,
        cfg.run.get("t0", 2.0),
        grid,
        cfg.run.get("n_traj", 100000),
        cfg.run.get("seed", 0),
        dt_phys=_dt_for(cfg, model, eps),
    )
    path = os.path.join(out, "density.csv")
    with atomic_write_path(path) as tmp:
        grids[0].to_csv(tmp)
    atomic_write(
        os.path.join(out, "density.json"),
        json.dumps(
            {
                "task": "density", "criterion": cfg.criterion, "model": model.name,
                "mass_in_box": grids[0].mass(), "verdict": "PASS",
                "n_effective": grids[0].n_effective,
            },
            indent=2,
        ),
    )
    return 0


def _task_timeavg(cfg: ExperimentConfig, out: str) -> int:
    from .density import estimate_time_averaged

    model = build_model(cfg.model["family"], cfg.model_params())
    eps = cfg.run["eps"]
    grid = _grid_from(cfg)
    g = estimate_time_averaged(
        model,
        tuple(cfg.run.get("x0", [0.0] * model.d)),
        eps,
        cfg.run.get("t0", 2.0),
        cfg.run.get("alpha"),
        grid,
        cfg.run.get("n_traj", 100000),
        cfg.run.get("seed", 0),
        dt_phys=_dt_for(cfg, model, eps),
    )
    lo, _ = g.ci()
    masked_lo = float(lo[g.hr_mask].min()) if g.hr_mask.any() else 0.0
    path = os.path.join(out, "timeavg.csv")
    with atomic_write_path(path) as tmp:
        g.to_csv(tmp)
    ok = masked_lo > 0
    atomic_write(
        os.path.join(out, "timeavg.json"),
        json.dumps(
            {
                "task": "timeavg", "criterion": cfg.criterion, "model": model.name,
                "min_masked_ci_low": masked_lo,
                "verdict": "PASS" if ok else "FAIL",
            },
            indent=2,
        ),
    )
    return 0 if ok else 2


def _sweep_job(args):
    family, params, R, t0, eps, grid_box, grid_cells, n_traj, seed, dt, scale = args
    from .density import GridSpec, estimate_density_grid, lattice_starts, _masked_min

    model = build_model(family, params)
    grid = GridSpec(box=grid_box, cells=grid_cells, R=R)
    starts = lattice_starts(model, R, scale=scale)
    grids = estimate_density_grid(model, starts, eps, t0, grid, n_traj, seed, dt_phys=dt)
    return _masked_min(grids)


def _task_minorize(cfg: ExperimentConfig, out: str) -> int:
    from .density import MinorizationReport

    family = cfg.model["family"]
    params = cfg.model_params()
    model = build_model(family, params)
    R = cfg.run["r_level"]
    t0 = cfg.run.get("t0", 2.0)
    eps_list = cfg.run["eps_list"]
    scale = cfg.run.get("lattice_scale", 0.9)
    n_traj = cfg.run.get("n_traj", 100000)
    seed = cfg.run.get("seed", 0)
    grid_box = tuple(tuple(p) for p in cfg.run["grid_box"])
    grid_cells = tuple(cfg.run["grid_cells"])
    jobs = [
        (
            family, params, R, t0, eps, grid_box, grid_cells, n_traj,
            rng.derive_seed(seed, "sweep", ei), _dt_for(cfg, model, eps), scale,
        )
        for ei, eps in enumerate(eps_list)
    ]
    workers = n_workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    lam = {e: r[0] for e, r in zip(eps_list, results)}
    lam_lo = {e: r[1] for e, r in zip(eps_list, results)}
    arg = {e: r[2] for e, r in zip(eps_list, results)}
    vals = list(lam.values())
    ratio = max(vals) / min(vals) if min(vals) > 0 else float("inf")
    bound = cfg.run.get("ratio_bound", 3.0)
    passed = min(lam_lo.values()) > 0 and ratio <= bound
    rows = [
        [e, t0, R, f"{lam[e]:.8g}", f"{lam_lo[e]:.8g}", arg[e][0], arg[e][1], n_traj, seed]
        for e in eps_list
    ]
    rep = MinorizationReport(
        R=R, t0=t0, eps_list=list(eps_list), lambda_hat=lam, lambda_ci_low=lam_lo,
        argmin=arg, ratio=ratio, passed=passed, n_traj=n_traj, seed=seed,
        per_eps_rows=rows,
    )
    with atomic_write_path(os.path.join(out, "sweep.csv")) as tmp:
        rep.to_csv(tmp)
    body = json.loads(rep.to_json())
    body["criterion"] = cfg.criterion
    atomic_write(os.path.join(out, "minorize.json"), json.dumps(body, indent=2))
    return 0 if passed else 2


def _task_mixing(cfg: ExperimentConfig, out: str) -> int:
    from .density import mixing_time

    model = build_model(cfg.model["family"], cfg.model_params())
    t_max = cfg.run.get("t_grid_max", 12.0)
    rep = mixing_time(
        model,
        cfg.run["eps_list"],
        tv_threshold=cfg.run.get("tv_threshold", 0.25),
        t_grid=np.arange(0.25, t_max + 0.01, 0.25),
        x0=tuple(cfg.run.get("x0", [2.0, 0.0])),
    )
    with atomic_write_path(os.path.join(out, "mixing.csv")) as tmp:
        rep.to_csv(tmp)
    with atomic_write_path(os.path.join(out, "tv_curves.csv")) as tmp:
        rep.curves_to_csv(tmp)
    ok = rep.spread <= cfg.run.get("ratio_bound", 1.3)
    atomic_write(
        os.path.join(out, "mixing.json"),
        json.dumps(
            {
                "task": "mixing", "criterion": cfg.criterion,
                "t_mix": {str(k): v for k, v in rep.t_mix.items()},
                "spread": rep.spread, "verdict": "PASS" if ok else "FAIL",
            },
            indent=2,
        ),
    )
    return 0 if ok else 2


def _task_steinhaus(cfg: ExperimentConfig, out: str) -> int:
    import csv

    from .markovkit import IntervalSet, steinhaus_growth, steinhaus_n, steinhaus_verify

    run = cfg.run
    results = []
    growth_rows = []
    if "intervals" in run:
        sets = [IntervalSet.of(run["intervals"])]
        L = run.get("l_bound", int(np.ceil(float(max(b for _, b in run["intervals"])))))
        eta = [s.measure() for s in sets]
    else:
        count = run.get("random_sets", 10)
        L = run.get("l_bound", 3)
        floor = Fraction(run.get("min_measure", Fraction(1, 2)))
        seed = run.get("seed", 0)
        sets, eta = [], []
        for i in range(count):
            sets.append(random_interval_set(L, floor, rng.derive_seed(seed, "steinhaus", i)))
            eta.append(floor)
    ok = True
    for i, (A, e) in enumerate(zip(sets, eta)):
        n = steinhaus_n(e, L)
        try:
            iv = steinhaus_verify(A, n)
            results.append({"set": i, "n": n, "interval": [str(iv[0]), str(iv[1])]})
        except AssertionError as exc:
            ok = False
            results.append({"set": i, "n": n, "error": str(exc)})
        for row in steinhaus_growth(A, min(n, 64)):
            growth_rows.append([i, row["k"], row["components"], row["measure"]])
    with atomic_write_path(os.path.join(out, "sumset_growth.csv")) as tmp:
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["set", "k", "components", "measure"])
            w.writerows(growth_rows)
    atomic_write(
        os.path.join(out, "steinhaus.json"),
        json.dumps(
            {
                "task": "steinhaus", "criterion": cfg.criterion,
                "results": results, "verdict": "PASS" if ok else "FAIL",
            },
            indent=2,
        ),
    )
    return 0 if ok else 2


def random_interval_set(L: int, min_measure: Fraction, seed: int):
    """Seeded union of <= 5 disjoint intervals in [0, L] with measure >=
    min_measure (rational endpoints on a 1/64 lattice)."""
    from .markovkit import IntervalSet

    g = np.random.default_rng(seed)
    q = 64
    while True:
        cuts = sorted(set(int(v) for v in g.integers(0, L * q + 1, size=10)))
        ivs = []
        for a, b in zip(cuts[::2], cuts[1::2]):
            if b > a:
                ivs.append((Fraction(a, q), Fraction(b, q)))
        if len(ivs) > 5:
            ivs = ivs[:5]
        s = IntervalSet.of(ivs) if ivs else None
        if s is not None and s.measure() >= min_measure:
            return s


def _task_lev(cfg: ExperimentConfig, out: str) -> int:
    from .markovkit import IntSet, lev_block, lev_min_n

    B = IntSet.of(cfg.run["values"])
    n = cfg.run.get("n_fold") or lev_min_n(B)
    sumset, run_len, hyp = lev_block(B, n)
    ok = (not hyp) or run_len >= n * (len(B) - 1)
    atomic_write(
        os.path.join(out, "lev.json"),
        json.dumps(
            {
                "task": "lev", "criterion": cfg.criterion,
                "values": list(B.values), "n": n, "hypotheses_ok": hyp,
                "longest_run": run_len, "bound": n * (len(B) - 1),
                "verdict": "PASS" if ok else "FAIL",
            },
            indent=2,
        ),
    )
    return 0 if ok else 2


def _task_smallset(cfg: ExperimentConfig, out: str) -> int:
    from .markovkit import KernelFamily, PipelineError, small_set_pipeline

    fam = KernelFamily.from_csv(
        cfg.run["kernel_csv"], cfg.run["times"], cfg.run["levels"]
    )
    try:
        res = small_set_pipeline(
            fam, cfg.run["r_level"], cfg.run["c_r"], cfg.run.get("c_upper", Fraction(1))
        )
    except PipelineError as exc:
        atomic_write(
            os.path.join(out, "smallset.json"),
            json.dumps(
                {"task": "smallset", "criterion": cfg.criterion,
                 "verdict": "FAIL", "error": str(exc)},
                indent=2,
            ),
        )
        return 2
    body = json.loads(res.to_json())
    body["task"] = "smallset"
    body["criterion"] = cfg.criterion
    body["verdict"] = "PASS"
    atomic_write(os.path.join(out, "smallset.json"), json.dumps(body, indent=2))
    return 0


def _task_polytope(cfg: ExperimentConfig, out: str) -> int:
    from .geometry import hausdorff_probe, sample_polytope, transversality_check

    run = cfg.run
    d = len(run["direction"]) if "direction" in run else 2
    P = sample_polytope(
        d, run.get("radius", 2.0), run.get("n_vertices", 200), run.get("seed", 0)
    )
    body = {
        "task": "polytope", "criterion": cfg.criterion,
        "dim": d, "n_vertices": len(P.vertices),
        "hausdorff_probe": hausdorff_probe(P),
    }
    ok = True
    if "direction" in run and d <= 3:
        trans, off = transversality_check(P, run["direction"])
        body["all_transverse"] = trans
        body["offending_facets"] = [list(map(float, o)) for o in off]
        ok = trans
    body["verdict"] = "PASS" if ok else "FAIL"
    atomic_write(os.path.join(out, "polytope.json"), json.dumps(body, indent=2))
    return 0 if ok else 2


TASK_RUNNERS = {
    "check": _task_check,
    "hormander": _task_hormander,
    "simulate": _task_simulate,
    "density": _task_density,
    "timeavg": _task_timeavg,
    "minorize": _task_minorize,
    "mixing": _task_mixing,
    "steinhaus": _task_steinhaus,
    "lev": _task_lev,
    "smallset": _task_smallset,
    "polytope": _task_polytope,
}


def run_config(path: str) -> int:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return TASK_RUNNERS[cfg.task](cfg, cfg.output)
    except (ModelError, ConfigError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


def run_report(out_dir: str) -> int:
    if not os.path.isdir(out_dir):
        print(f"not a directory: {out_dir}", file=sys.stderr)
        return 1
    tasks = []
    corrupt = []
    for name in sorted(os.listdir(out_dir)):
        path = os.path.join(out_dir, name)
        if name.endswith(".json") and name != "summary.json":
            try:
                with open(path) as fh:
                    body = json.load(fh)
                tasks.append(
                    {
                        "file": name,
                        "task": body.get("task"),
                        "criterion": body.get("criterion"),
                        "verdict": body.get("verdict", "UNKNOWN"),
                    }
                )
            except (json.JSONDecodeError, OSError) as exc:
                corrupt.append({"file": name, "error": str(exc)})
        elif name.endswith(".csv"):
            try:
                with open(path) as fh:
                    header = fh.readline()
                    if not header.strip():
                        raise ValueError("empty header")
                    ncol = len(header.split(","))
                    for line in fh:
                        if line.strip() and len(line.split(",")) != ncol:
                            raise ValueError(f"ragged row in {name}")
            except (OSError, ValueError) as exc:
                corrupt.append({"file": name, "error": str(exc)})
    summary = {
        "tasks": tasks,
        "criteria": {
            t["criterion"]: t["verdict"] for t in tasks if t.get("criterion")
        },
        "corrupt": corrupt,
        "verdict": "PASS"
        if not corrupt and all(t["verdict"] == "PASS" for t in tasks)
        else "FAIL",
    }
    atomic_write(os.path.join(out_dir, "summary.json"), json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return 2 if corrupt else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="minorlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run one experiment config")
    runp.add_argument("config")
    repp = sub.add_parser("report", help="merge task outputs into a summary")
    repp.add_argument("output_dir")
    sub.add_parser("print-schema", help="dump the config schema")
    args = ap.parse_args(argv)
    if args.command == "run":
        return run_config(args.config)
    if args.command == "report":
        return run_report(args.output_dir)
    print(schema_json())
    return 0


if __name__ == "__main__":
    sys.exit(main())
