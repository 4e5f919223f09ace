"""Model builders and the structural-assumption auditor."""

import random
from dataclasses import replace
from fractions import Fraction

import pytest

from minorlab.models import (
    AssumptionError,
    ModelError,
    build_model,
    check_assumptions,
    lyapunov_drift,
    rational_samples,
)
from minorlab.symbolic import Surd, format_field, lie_bracket, parse_field, parse_scalar

ALL_MODELS = {
    "langevin": build_model("langevin", {"n": 2}),
    "oscillator": build_model(
        "oscillator_chain",
        {"n": 3, "k": 1, "j": 1, "gamma1": 1, "gamman": 1, "T1": 1, "Tn": 2},
    ),
    "lorenz": build_model("lorenz96", {"d": 4}),
    "fluid": build_model(
        "fluid_generic",
        {"d": 3, "lambdas": [1, 1, 1],
         "B": "x2*x3*d/dx1 + x3*x1*d/dx2 - 2*x1*x2*d/dx3"},
    ),
}


def test_langevin_quadratic_shape():
    m = build_model("langevin", {"n": 1})
    assert (m.d, m.r) == (2, 1)
    assert m.Z == parse_field("v1*d/dv1", 2)
    assert m.Z0 == parse_field("v1*d/dx1 - x1*d/dv1", 2)
    assert m.Zs[0] == parse_field("d/dv1", 2)
    assert m.H == parse_scalar("1/2*v1^2 + 1/2*x1^2", 2)
    assert m.eta == 1 and m.dstar == 2


def test_oscillator_constants():
    m = ALL_MODELS["oscillator"]
    assert m.r == 2
    assert m.Zs[0] == parse_field("d/dv1", 6)
    assert m.Zs[1].components[5].constant_value() == Surd.sqrt(2)
    assert m.eta == Fraction(1, 2)
    assert m.dstar == 2 * (1 * 1 + 1 * 2)


def test_lorenz_constants_and_eta():
    m = ALL_MODELS["lorenz"]
    assert m.eta == Fraction(1, 2)  # min(l1/(2 s1^2), l3/(2 s3^2))
    assert m.dstar == 8
    with pytest.raises(ModelError):
        build_model("lorenz96", {"d": 4, "lambdas": [1, 0, 0, 0], "sigmas": [1, 0, 1, 0]})
    with pytest.raises(ModelError):
        build_model("lorenz96", {"d": 4, "sigmas": [1, 1, 1, 0], "lambdas": [1, 0, 1, 0]})
    with pytest.raises(ModelError):
        build_model("lorenz96", {"d": 3})


def test_fluid_rejects_nonconservative_field():
    with pytest.raises(ModelError, match="conserve length"):
        build_model("fluid_generic", {"d": 2, "lambdas": [1, 1], "B": "x2*d/dx1"})
    with pytest.raises(ModelError, match="divergence-free"):
        build_model("fluid_generic", {"d": 2, "lambdas": [1, 1], "B": "x1*d/dx1 - x1*x2*d/dx2"})


def test_build_model_deterministic():
    a = build_model("oscillator_chain", {"n": 2, "T1": 1, "Tn": 3})
    b = build_model("oscillator_chain", {"n": 2, "T1": 1, "Tn": 3})
    assert a.Z0 == b.Z0 and a.H == b.H and a.Zs == b.Zs and a.eta == b.eta


@pytest.mark.parametrize("name", sorted(ALL_MODELS))
def test_exact_structure_all_models(name):
    m = ALL_MODELS[name]
    assert m.Z0.divergence().is_zero()
    for Zj in m.Zs:
        assert Zj.divergence().is_zero()
    assert m.Z0.apply(m.H).is_zero()


@pytest.mark.parametrize("name", sorted(ALL_MODELS))
def test_audit_passes_all_models(name):
    rep = check_assumptions(ALL_MODELS[name], n_points=400, seed=3)
    assert rep.passed
    assert Fraction(rep.v4_pointwise["worst_margin_subinvariance"]) >= 0
    assert Fraction(rep.v4_pointwise["worst_margin_dstar"]) >= 0
    assert rep.lyapunov["symbolic"]


def test_langevin_v4_second_inequality_is_equality():
    rep = check_assumptions(ALL_MODELS["langevin"], n_points=50, seed=0)
    assert Fraction(rep.v4_pointwise["worst_margin_dstar"]) == 0


def test_broken_lorenz_fails_with_documented_witness():
    bad = replace(ALL_MODELS["lorenz"], eta=Fraction(1))
    with pytest.raises(AssumptionError) as err:
        check_assumptions(bad, n_points=200, seed=1)
    assert err.value.witness == (Fraction(10), Fraction(0), Fraction(0), Fraction(0))
    # LHS 400 vs RHS 204 at the witness
    assert err.value.margin == -196


def test_verdict_independent_of_sample_order():
    m = ALL_MODELS["lorenz"]
    a = check_assumptions(m, n_points=300, seed=9)
    b = check_assumptions(m, n_points=300, seed=9)
    assert a.v4_pointwise == b.v4_pointwise


def test_trivial_conservation_for_zero_drift():
    from minorlab.symbolic import PolyExpr, VectorField

    m = ALL_MODELS["langevin"]
    silent = replace(m, Z0=VectorField.zero(m.d))
    rep = check_assumptions(silent, n_points=10, seed=0)
    assert rep.v3_conserves


def test_lyapunov_drift_values():
    m = build_model("langevin", {"n": 1})
    V = m.H + 1
    pts = [(Fraction(0), Fraction(0)), (Fraction(1), Fraction(2))]
    rep = lyapunov_drift(m, V, Fraction(1, 10), pts)
    # L_eps V = eps (1 - v^2): eps at the origin, -3 eps at v = 2
    assert rep.values[0] == Fraction(1, 10)
    assert rep.values[1] == Fraction(1, 10) * (1 - 4)
    assert rep.dstar_margin is not None and rep.dstar_margin >= 0


def test_lyapunov_drift_constant_V():
    from minorlab.symbolic import PolyExpr

    m = build_model("langevin", {"n": 1})
    one = PolyExpr.const(2, 1)
    rep = lyapunov_drift(m, one, Fraction(1, 2), [(0, 0), (3, -2)])
    assert all(v == 0 for v in rep.values)


def test_lyapunov_drift_lorenz_formula():
    m = ALL_MODELS["lorenz"]
    V = m.H + 1
    pts = rational_samples(20, 4, seed=5, box=3.0)
    rep = lyapunov_drift(m, V, Fraction(1, 8), pts)
    for p, v in zip(pts, rep.values):
        expected = Fraction(1, 8) * (
            -2 * (p[0] ** 2 + p[2] ** 2) + 2 * 2
        )
        assert v == expected
    assert rep.dstar_margin >= 0


def test_lyapunov_requires_V_at_least_one():
    m = build_model("langevin", {"n": 1})
    with pytest.raises(ValueError, match="V < 1"):
        lyapunov_drift(m, m.H, Fraction(1, 10), [(0, 0)])


def test_v4_margin_property_at_many_points():
    # worst margins stay nonnegative (exact arithmetic) at 10^4 points
    for name in ("langevin", "lorenz"):
        m = ALL_MODELS[name]
        rep = check_assumptions(m, n_points=10_000, seed=2026)
        assert Fraction(rep.v4_pointwise["worst_margin_subinvariance"]) >= 0
        assert Fraction(rep.v4_pointwise["worst_margin_dstar"]) >= 0


def test_lorenz_conservation_numeric_cross_check():
    # the exact symbolic zero, cross-checked by evaluation at random points
    m = ALL_MODELS["lorenz"]
    g = random.Random(4)
    Z0H = m.Z0.apply(m.H)
    assert Z0H.is_zero()
    for _ in range(100):
        p = tuple(Fraction(g.randint(-800, 800), 64) for _ in range(4))
        assert m.H.eval(p).sign() >= 0
        total = sum(
            (comp.eval(p) * m.H.partial(i).eval(p)
             for i, comp in enumerate(m.Z0.components)),
            start=Fraction(0),
        )
        assert total.is_zero()


def test_nonconstant_damping_divergence_flagged():
    # a damping field with polynomial divergence exercises the sampled,
    # non-rigorous branch of the damping inequality
    from minorlab.symbolic import PolyExpr, VectorField

    d = 2
    x1 = PolyExpr.var(d, 0)
    Z = VectorField([x1 + x1**3 * Fraction(1, 600), PolyExpr.zero(d)])
    H = x1**2 + PolyExpr.var(d, 1) ** 2
    m = replace(
        build_model("langevin", {"n": 1}),
        Z=Z, Z0=VectorField.zero(d), Zs=(), r=0, H=H, dstar=Fraction(4),
    )
    rep = check_assumptions(m, n_points=200, seed=1, box=10.0)
    assert rep.v2_damping["constant"] is False
    assert rep.v2_damping["rigorous"] is False
