"""Bracket enumeration and the spanning certificate."""

import math
from fractions import Fraction

import numpy as np
import pytest

from minorlab.models import build_model
from minorlab.symbolic import (
    enumerate_brackets,
    format_field,
    hormander_certificate,
    lie_bracket,
    parse_field,
)
from minorlab.symbolic.poly import PolyExpr

LANGEVIN = build_model("langevin", {"n": 1})


def lorenz_samples(model, R=1.0, n_random=8, seed=7):
    from minorlab.cli import certificate_samples

    return certificate_samples(model, R, n_random, seed)


def test_langevin_bracket_set_depth2():
    cert = hormander_certificate(LANGEVIN, 2, x_samples=[(0.0, 0.0)])
    words = {b.word for b in cert.brackets}
    assert words == {(1,), (0, 1)}
    assert cert.passed


def test_langevin_known_singular_value_at_eps_one():
    # direction matrix rows (0,1), (1,-1) at eps = 1
    nodes = enumerate_brackets(
        LANGEVIN.Z0 - LANGEVIN.Z.scale_poly(PolyExpr.eps(2)), list(LANGEVIN.Zs), 2
    )
    mat = np.stack(
        [n.field.compile()(np.zeros((1, 2)), 1.0)[0] for n in nodes], axis=-1
    )
    smin = np.linalg.svd(mat, compute_uv=False)[-1]
    assert math.isclose(smin, math.sqrt((3 - math.sqrt(5)) / 2), rel_tol=1e-12)


def test_identity_floor_at_small_eps():
    cert = hormander_certificate(
        LANGEVIN, 2, eps_grid=[Fraction(1, 10**6)], x_samples=[(0.3, -0.7)]
    )
    assert cert.uniform_floor == pytest.approx(1.0, abs=1e-3)


def test_node_fields_recomputable_from_words():
    model = build_model("lorenz96", {"d": 4})
    drift = model.Z0 - model.Z.scale_poly(PolyExpr.eps(4))
    generators = [drift] + list(model.Zs)
    nodes = enumerate_brackets(drift, list(model.Zs), 3)
    for node in nodes:
        assert node.recompute(generators) == node.field


def test_verdict_invariant_under_sample_permutation():
    samples = lorenz_samples(build_model("lorenz96", {"d": 4}))
    model = build_model("lorenz96", {"d": 4})
    a = hormander_certificate(model, 3, x_samples=samples)
    b = hormander_certificate(model, 3, x_samples=list(reversed(samples)))
    grid = list(a.eps_grid)
    c = hormander_certificate(model, 3, eps_grid=list(reversed(grid)), x_samples=samples)
    assert a.passed == b.passed == c.passed
    assert a.uniform_floor == pytest.approx(b.uniform_floor)
    assert a.uniform_floor == pytest.approx(c.uniform_floor)


def test_lorenz_passes_depth3_fails_depth2():
    model = build_model("lorenz96", {"d": 4})
    samples = lorenz_samples(model)
    c2 = hormander_certificate(model, 2, x_samples=samples)
    c3 = hormander_certificate(model, 3, x_samples=samples)
    assert not c2.passed
    assert c2.deficiencies and all(d["rank"] < 4 for d in c2.deficiencies)
    assert c3.passed


def test_empty_samples_rejected():
    with pytest.raises(ValueError, match="empty sample set"):
        hormander_certificate(LANGEVIN, 2, x_samples=[])


def test_json_report_fields():
    import json

    cert = hormander_certificate(LANGEVIN, 2, x_samples=[(0.1, 0.2)])
    body = json.loads(cert.to_json())
    for key in ("brackets", "eps_grid", "floor_matrix", "verdict"):
        assert key in body
    assert body["verdict"] == "PASS"


def test_smoothing_order_metadata():
    cert = hormander_certificate(LANGEVIN, 2, x_samples=[(0.1, 0.2)])
    orders = {b.word: b.smoothing_order for b in cert.brackets}
    assert orders[(1,)] == 1  # a bare noise direction
    assert orders[(0, 1)] == Fraction(1, 3)  # one drift + one noise letter


def test_origin_needs_depth_five_on_tight_ring():
    # at the exact origin the depth-3 directions span only three
    # dimensions; two more letters recover full rank
    model = build_model("lorenz96", {"d": 4})
    shallow = hormander_certificate(model, 3, x_samples=[(0.0,) * 4])
    deep = hormander_certificate(model, 5, x_samples=[(0.0,) * 4])
    assert not shallow.passed
    assert deep.passed
