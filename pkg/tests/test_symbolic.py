"""Exact algebra: surds, polynomials, the field DSL, brackets, ad powers."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minorlab.symbolic import (
    ParseError,
    PolyExpr,
    Surd,
    VectorField,
    ad_power,
    apply_to_scalar,
    divergence,
    format_field,
    format_scalar,
    lie_bracket,
    parse_field,
    parse_scalar,
)


# -- surds -----------------------------------------------------------------


def test_surd_sqrt_reduction():
    assert Surd.sqrt(Fraction(9, 4)).as_fraction() == Fraction(3, 2)
    s = Surd.sqrt(8)
    assert s == Surd.of(2) * Surd.sqrt(2)
    assert (s * s).as_fraction() == 8


def test_surd_sign_exact():
    assert (Surd.sqrt(2) - Surd.of(Fraction(141421356, 100000000))).sign() == 1
    assert (Surd.sqrt(2) - Surd.of(Fraction(141421357, 100000000))).sign() == -1
    assert (Surd.sqrt(2) + Surd.sqrt(3) - Surd.of(Fraction(31462, 10000))).sign() == 1


def test_surd_is_ring():
    a = Surd.sqrt(2) + Surd.of(Fraction(1, 3))
    b = Surd.sqrt(3) - Surd.of(2)
    assert (a * b - b * a).is_zero()
    assert ((a + b) * (a - b) - (a * a - b * b)).is_zero()
    with pytest.raises(ValueError):
        Surd.sqrt(-1)
    with pytest.raises(ValueError):
        a.as_fraction()


# -- parser ----------------------------------------------------------------


def test_parse_velocity_aliasing():
    X = parse_field("v1*d/dx1 - eps*v1*d/dv1", 2)
    assert X.components[0] == PolyExpr.var(2, 1)
    assert X.components[1] == -(PolyExpr.var(2, 1) * PolyExpr.eps(2))


def test_parse_zero_field():
    Z = parse_field("0*d/dx1", 1)
    assert Z.is_zero()
    assert Z.components[0].terms == {}


@pytest.mark.parametrize(
    "text,dim",
    [
        ("3/2*x1^2*d/dx2", 2),
        ("v1*d/dx1 - eps*v1*d/dv1", 2),
        ("(1 + 2*eps)*x1*x2^3*d/dx1 - 7*d/dx2", 2),
        ("sqrt(2)*d/dv2", 4),
        ("x1^2*x2*d/dx3 + (1/3 + sqrt(3))*eps^2*d/dx1", 3),
    ],
)
def test_roundtrip_identity(text, dim):
    X = parse_field(text, dim)
    assert parse_field(format_field(X), dim) == X


def test_parse_errors_carry_offsets():
    with pytest.raises(ParseError) as err:
        parse_field("x1*d/dx3", 2)
    assert err.value.offset == 3
    with pytest.raises(ParseError, match="negative exponent"):
        parse_field("x1^-2*d/dx1", 1)
    with pytest.raises(ParseError, match="missing a basis"):
        parse_field("x1 + x1^2", 1)
    with pytest.raises(ParseError):
        parse_scalar("x1 + ", 1)
    with pytest.raises(ParseError, match="exceeds dimension"):
        parse_scalar("x1 + x5", 3)


# -- bracket identities -----------------------------------------------------


def test_commutator_example():
    X0 = parse_field("v1*d/dx1 - eps*v1*d/dv1", 2)
    X1 = parse_field("d/dv1", 2)
    assert lie_bracket(X1, X0) == parse_field("d/dx1 - eps*d/dv1", 2)


def test_bracket_antisymmetry_diagonal():
    X = parse_field("x1^2*d/dx1 + x2*x1*d/dx2", 2)
    assert lie_bracket(X, X).is_zero()


def test_divergence_examples():
    # conservative drift of a Langevin pair: no component depends on itself
    Z0 = parse_field("v1*d/dx1 - x1*d/dv1", 2)
    assert divergence(Z0).is_zero()
    # v . grad_v in three velocities
    Z = parse_field("v1*d/dv1 + v2*d/dv2 + v3*d/dv3", 6)
    assert divergence(Z) == PolyExpr.const(6, 3)
    # diagonal damping with rates (1, 0, 1, 0)
    Zl = parse_field("x1*d/dx1 + x3*d/dx3", 4)
    assert divergence(Zl) == PolyExpr.const(4, 2)


def test_ad_power_base_cases():
    X = parse_field("x2*d/dx1", 2)
    Y = parse_field("x1*d/dx2", 2)
    assert ad_power(X, Y, 0) == Y
    assert ad_power(X, X, 1).is_zero()
    with pytest.raises(ValueError):
        ad_power(X, Y, -1)


def test_apply_to_scalar_conservation():
    # v dx - U'(x) dv applied to H = v^2/2 + U cancels exactly
    U = parse_scalar("x1^4 + 1/2*x1^2", 1)
    H = parse_scalar("1/2*v1^2 + x1^4 + 1/2*x1^2", 2)
    Z0 = VectorField(
        [PolyExpr.var(2, 1), -(parse_scalar("4*x1^3 + x1", 2))]
    )
    assert apply_to_scalar(Z0, H).is_zero()
    Z = parse_field("v1*d/dv1", 2)
    assert apply_to_scalar(Z, H) == parse_scalar("v1^2", 2)


# -- hypothesis properties ---------------------------------------------------


def small_polys(dim):
    coeff = st.fractions(
        min_value=Fraction(-3), max_value=Fraction(3), max_denominator=4
    )
    key = st.tuples(*([st.integers(0, 2)] * dim + [st.integers(0, 1)]))
    return st.dictionaries(key, coeff, max_size=3).map(
        lambda terms: PolyExpr(dim, terms)
    )


def small_fields(dim=2):
    return st.lists(small_polys(dim), min_size=dim, max_size=dim).map(VectorField)


@settings(max_examples=60, deadline=None)
@given(small_fields(), small_fields(), small_fields())
def test_jacobi_identity(X, Y, W):
    total = (
        lie_bracket(X, lie_bracket(Y, W))
        + lie_bracket(Y, lie_bracket(W, X))
        + lie_bracket(W, lie_bracket(X, Y))
    )
    assert total.is_zero()


@settings(max_examples=60, deadline=None)
@given(small_fields(), small_fields())
def test_bracket_antisymmetry(X, Y):
    assert (lie_bracket(X, Y) + lie_bracket(Y, X)).is_zero()


@settings(max_examples=60, deadline=None)
@given(small_fields(), small_fields(), small_fields())
def test_bracket_bilinearity(X, Y, W):
    left = lie_bracket(X + Y, W)
    assert (left - lie_bracket(X, W) - lie_bracket(Y, W)).is_zero()


@settings(max_examples=60, deadline=None)
@given(small_fields(), small_fields())
def test_divergence_of_bracket(X, Y):
    lhs = divergence(lie_bracket(X, Y))
    rhs = apply_to_scalar(X, divergence(Y)) - apply_to_scalar(Y, divergence(X))
    assert lhs == rhs
