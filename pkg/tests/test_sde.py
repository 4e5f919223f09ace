"""Ensemble integration and the exact Gaussian law."""

import numpy as np
import pytest

from minorlab.models import build_model
from minorlab.sde import (
    GaussianLaw,
    SimConfig,
    SimulationError,
    drift_matrix,
    gaussian_oracle,
    noise_gram,
    simulate_ensemble,
    simulate_to_times,
    stationary_law,
)

LANGEVIN = build_model("langevin", {"n": 1})
LORENZ = build_model("lorenz96", {"d": 4})


def test_conservative_flow_preserves_energy():
    cfg = SimConfig(
        eps=0.5, t_end=1.0, dt_phys=1e-3, n_traj=8, seed=1,
        x0=(1.0, 0.0), zero_eps=True, noise_scale=0.0,
    )
    es = simulate_ensemble(LANGEVIN, cfg)
    H = LANGEVIN.H.compile()
    assert np.abs(H(es.points) - 0.5).max() <= 1e-4


def test_determinism_bit_identical():
    cfg = SimConfig(eps=0.2, t_end=0.5, dt_phys=5e-3, n_traj=30_000, seed=99, x0=(1.0, 0.0))
    a = simulate_ensemble(LANGEVIN, cfg)
    b = simulate_ensemble(LANGEVIN, cfg)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.escaped, b.escaped)
    assert a.meta["config"] == b.meta["config"]


def test_prefix_stability_under_larger_ensembles():
    small = SimConfig(eps=0.2, t_end=0.2, dt_phys=5e-3, n_traj=1000, seed=4, x0=(1.0, 0.0))
    large = SimConfig(eps=0.2, t_end=0.2, dt_phys=5e-3, n_traj=3000, seed=4, x0=(1.0, 0.0))
    a = simulate_ensemble(LANGEVIN, small)
    b = simulate_ensemble(LANGEVIN, large)
    assert np.array_equal(a.points, b.points[:1000])


def test_backend_agreement():
    import os

    cfg = SimConfig(eps=0.3, t_end=0.5, dt_phys=5e-3, n_traj=5000, seed=12, x0=(0.5, 0.5))
    fast = simulate_ensemble(LANGEVIN, cfg)
    os.environ["MINORLAB_BACKEND"] = "numpy"
    try:
        slow = simulate_ensemble(LANGEVIN, cfg)
    finally:
        del os.environ["MINORLAB_BACKEND"]
    assert np.abs(fast.points - slow.points).max() < 1e-10


def test_mean_matches_oracle_within_3se():
    cfg = SimConfig(eps=0.1, t_end=2.0, dt_phys=4e-3, n_traj=100_000, seed=42, x0=(1.0, 0.0))
    es = simulate_ensemble(LANGEVIN, cfg)
    law = gaussian_oracle(LANGEVIN, 0.1, 2.0, (1.0, 0.0))
    se = es.points.std(axis=0) / np.sqrt(len(es.points))
    assert (np.abs(es.points.mean(axis=0) - law.mean) <= 3 * se).all()


def test_oracle_mc_cross_check_mean_and_cov():
    cfg = SimConfig(eps=0.1, t_end=1.0, dt_phys=2e-3, n_traj=200_000, seed=7, x0=(1.0, 0.0))
    es = simulate_ensemble(LANGEVIN, cfg)
    law = gaussian_oracle(LANGEVIN, 0.1, 1.0, (1.0, 0.0))
    n = len(es.points)
    se = es.points.std(axis=0) / np.sqrt(n)
    assert (np.abs(es.points.mean(axis=0) - law.mean) <= 3 * se).all()
    cov = np.cov(es.points.T)
    for i in range(2):
        for j in range(2):
            se_ij = np.sqrt((law.cov[i, i] * law.cov[j, j] + law.cov[i, j] ** 2) / n)
            assert abs(cov[i, j] - law.cov[i, j]) <= 3 * se_ij + 1e-3


def test_weak_order_halving_dt():
    base = dict(eps=0.2, t_end=1.0, n_traj=100_000, seed=5, x0=(1.0, 0.0))
    a = simulate_ensemble(LANGEVIN, SimConfig(dt_phys=8e-3, **base))
    b = simulate_ensemble(LANGEVIN, SimConfig(dt_phys=4e-3, **base))
    # the two runs draw independent noise; the difference of means carries
    # sqrt(2) of the single-run standard error
    se = a.points.std(axis=0) / np.sqrt(len(a.points))
    diff = np.abs(a.points.mean(axis=0) - b.points.mean(axis=0))
    assert (diff <= 3 * np.sqrt(2) * se).all()


def test_lorenz_energy_balance():
    # d E|x|^2 / dt(phys) = eps(-2 sum l_i E x_i^2 + 2 sum s_j^2)
    eps, dtp = 0.2, 5e-3
    x0 = (0.8, 0.4, -0.3, 0.1)
    cfg1 = SimConfig(eps=eps, t_end=eps * 0.5, dt_phys=dtp, n_traj=200_000, seed=3, x0=x0)
    cfg2 = SimConfig(eps=eps, t_end=eps * 0.5 + eps * dtp * 20, dt_phys=dtp, n_traj=200_000, seed=3, x0=x0)
    e1 = simulate_ensemble(LORENZ, cfg1)
    e2 = simulate_ensemble(LORENZ, cfg2)
    H = LORENZ.H.compile()
    h1, h2 = H(e1.points), H(e2.points)
    window = dtp * 20
    rate_mc = (h2.mean() - h1.mean()) / window
    xsq = (e1.points**2).mean(axis=0)
    rate_formula = eps * (-2 * (xsq[0] + xsq[2]) + 2 * 2)
    se = 3 * (h2 - h1).std() / np.sqrt(len(h1)) / window
    assert abs(rate_mc - rate_formula) <= se + 0.05 * abs(rate_formula)


def test_escape_flags_freeze_state():
    cfg = SimConfig(
        eps=0.3, t_end=1.0, dt_phys=5e-3, n_traj=2000, seed=8,
        x0=(1.0, 0.0), escape_radius=1.2,
    )
    es = simulate_ensemble(LANGEVIN, cfg)
    H = LANGEVIN.H.compile()
    assert es.escaped.any()
    # frozen states sit at their last in-domain value, below the level
    assert H(es.points[es.escaped]).max() < 1.2


def test_escaped_fraction_small_at_defaults():
    for model, x0 in ((LANGEVIN, (1.0, 0.0)), (LORENZ, (0.5, 0.5, 0.5, 0.5))):
        cfg = SimConfig(eps=0.2, t_end=1.0, dt_phys=5e-3, n_traj=20_000, seed=17, x0=x0)
        es = simulate_ensemble(model, cfg)
        assert es.escaped.mean() < 1e-3


def test_nonlinear_drift_rejected_by_oracle():
    with pytest.raises(ValueError, match="nonlinear"):
        drift_matrix(LORENZ, 0.1)
    with pytest.raises(ValueError, match="nonlinear"):
        gaussian_oracle(LORENZ, 0.1, 1.0, (0, 0, 0, 0))


def test_oracle_t0_and_stationary_limit():
    law0 = gaussian_oracle(LANGEVIN, 0.1, 0.0, (1.0, 0.0))
    assert np.allclose(law0.mean, [1, 0]) and np.abs(law0.cov).max() == 0
    for eps in (0.3, 0.05):
        law = gaussian_oracle(LANGEVIN, eps, 200.0, (1.0, 0.0))
        assert np.abs(law.cov - np.eye(2)).max() <= 1e-6
        assert np.abs(law.mean).max() <= 1e-6


def test_stationary_law_solves_lyapunov():
    st = stationary_law(LANGEVIN, 0.1)
    A, _ = drift_matrix(LANGEVIN, 0.1)
    Q = 2 * 0.1 * noise_gram(LANGEVIN)
    res = A @ st.cov + st.cov @ A.T + Q
    assert np.abs(res).max() < 1e-12
    assert np.abs(st.cov - np.eye(2)).max() < 1e-12


def test_gaussian_law_validates_covariance():
    with pytest.raises(ValueError, match="asymmetry"):
        GaussianLaw(mean=np.zeros(2), cov=np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="negative eigenvalue"):
        GaussianLaw(mean=np.zeros(2), cov=np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_variable_end_times_match_fixed_runs_statistically():
    taus = np.full(40_000, 1.0)
    cfgv = SimConfig(eps=0.2, t_end=1.0, dt_phys=5e-3, n_traj=40_000, seed=21, x0=(1.0, 0.0))
    ev = simulate_to_times(LANGEVIN, cfgv, taus)
    law = gaussian_oracle(LANGEVIN, 0.2, 1.0, (1.0, 0.0))
    se = ev.points.std(axis=0) / np.sqrt(len(ev.points))
    assert (np.abs(ev.points.mean(axis=0) - law.mean) <= 3.5 * se).all()


def test_stability_heuristic_trips_on_huge_dt():
    cfg = SimConfig(eps=0.5, t_end=4.0, dt_phys=0.9, n_traj=64, seed=0, x0=(3.0, 0.0))
    with pytest.raises(SimulationError):
        simulate_ensemble(LORENZ, SimConfig(
            eps=0.5, t_end=40.0, dt_phys=0.9, n_traj=64, seed=0, x0=(3.0, 3.0, 3.0, 3.0)
        ))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(eps=1.5, t_end=1.0, dt_phys=1e-3, n_traj=1, seed=0, x0=(0, 0))
    with pytest.raises(ValueError):
        SimConfig(eps=0.5, t_end=1.0, dt_phys=-1e-3, n_traj=1, seed=0, x0=(0, 0))
    with pytest.raises(ValueError):
        SimConfig(eps=0.5, t_end=1.0, dt_phys=1e-3, n_traj=0, seed=0, x0=(0, 0))
