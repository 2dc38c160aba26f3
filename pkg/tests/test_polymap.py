from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifurcurve.polymap import (
    Polynomial,
    PolynomialError,
    PolynomialMap,
    evaluate,
    format_polynomial,
    jacobian,
    milnor_polynomial,
    parse_map,
    parse_polynomial,
    squared_distance,
)

XY = ["x", "y"]


def test_parse_expands_products_and_powers():
    p = parse_polynomial("(x + y)^2 - 2*x*y", XY)
    assert p == parse_polynomial("x^2 + y^2", XY)


def test_canonical_form_of_fixture():
    assert str(parse_map("y*(2*x^2*y^2-9*x*y+12)", XY)) == "2*x^2*y^3 - 9*x*y^2 + 12*y"


def test_decimal_coefficients_are_exact():
    p = parse_polynomial("0.5*x - .25", XY)
    assert dict(p.terms)[(1, 0)] == Fraction(1, 2)
    assert dict(p.terms)[(0, 0)] == Fraction(-1, 4)


@pytest.mark.parametrize(
    "text",
    ["x +", "x ^ y", "2*(x + y", "x + q", "x^-1", "x $ y", ""],
)
def test_malformed_expressions(text):
    with pytest.raises(PolynomialError):
        parse_map(text, XY)


def test_component_count_must_match():
    with pytest.raises(PolynomialError):
        parse_map("x; y", XY)
    with pytest.raises(PolynomialError):
        parse_map("x", ["x", "y", "z"])


def test_map_with_two_components():
    F = parse_map("z; x + x^2*y", ["x", "y", "z"])
    assert F.domain_dim == 3 and F.target_dim == 2
    np.testing.assert_allclose(evaluate(F, [1.0, 2.0, 3.0]), [3.0, 3.0])


def test_jacobian_matches_finite_differences():
    F = parse_map("z*x - y^3; x + x^2*y", ["x", "y", "z"])
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.uniform(-2, 2, 3)
        J = jacobian(F, x).matrix
        h = 1e-6
        fd = np.column_stack([(evaluate(F, x + h * e) - evaluate(F, x - h * e)) / (2 * h) for e in np.eye(3)])
        np.testing.assert_allclose(J, fd, rtol=1e-6, atol=1e-6)


def test_milnor_polynomial_identities():
    f1 = parse_map("x + x^2*y", XY)
    assert milnor_polynomial(f1, (0, 0)) == parse_polynomial("-x^3 + 2*x*y^2 + y", XY)
    f3 = parse_map("y*(2*x^2*y^2-9*x*y+12)", XY)
    assert milnor_polynomial(f3, (0, 0)) == parse_polynomial("-6*x^3*y^2 + 4*x*y^4 + 18*x^2*y - 9*y^3 - 12*x", XY)
    # radial maps are tangent to every sphere about their centre
    assert milnor_polynomial(parse_map("x^2+y^2", XY), (0, 0)).is_zero()


def test_milnor_polynomial_is_the_tangency_determinant():
    f = parse_map("x^3 - x*y + y^2", XY)
    c = (0.5, -1.0)
    m = milnor_polynomial(f, c)
    rng = np.random.default_rng(0)
    for x in rng.uniform(-2, 2, (5, 2)):
        J = jacobian(f, x).matrix
        direct = np.linalg.det(np.vstack([J, x - np.array(c)]))
        assert m(x) == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_squared_distance():
    p = squared_distance(XY, (1, 0))
    assert p(np.array([3.0, 4.0])) == pytest.approx(20.0)


def test_variables_validated():
    with pytest.raises(PolynomialError):
        parse_map("x", ["x", "x"])


_coeff = st.integers(-5, 5)
_exp = st.tuples(st.integers(0, 3), st.integers(0, 3))
_poly = st.dictionaries(_exp, _coeff, max_size=6).map(lambda d: Polynomial.from_dict(XY, d))


@settings(max_examples=60, deadline=None)
@given(_poly)
def test_format_parse_round_trip(p):
    assert parse_polynomial(format_polynomial(p), XY) == p


@settings(max_examples=60, deadline=None)
@given(_poly, _poly, st.tuples(st.integers(-3, 3), st.integers(-3, 3)))
def test_numeric_evaluation_matches_exact(p, q, pt):
    r = p * q + p
    assert r(np.array(pt, dtype=float)) == pytest.approx(float(r.evaluate_exact(pt)), rel=1e-12, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(_poly)
def test_packed_gradient_matches_symbolic(p):
    F = PolynomialMap.from_polys([p])
    x = np.array([0.7, -1.3])
    grad = [g(x) for g in p.gradient()]
    np.testing.assert_allclose(F.packed.jacobian(x)[0], grad, rtol=1e-12, atol=1e-12)
