import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowup.expr import (
    DomainError, ExprSyntaxError, UnknownIdentifierError, VariableIndexError,
    evaluate, evaluate_many, gradient, parse, unparse, value_and_grad,
)


@pytest.mark.parametrize("src,point,expected", [
    ("1+2*3", [0.0], 7.0),
    ("2^3^2", [0.0], 512.0),           # right-associative
    ("-2^2", [0.0], -4.0),             # unary minus binds looser than ^
    ("(1+2)*3", [0.0], 9.0),
    ("x1-x2-x3", [1.0, 2.0, 3.0], -4.0),
    ("8/4/2", [0.0], 1.0),
    ("norm()", [3.0, 4.0], 5.0),
    ("hypot(x1, x2)", [3.0, 4.0], 5.0),
    ("min(x1, x2) + max(x1, x2)", [1.0, 2.0], 3.0),
    ("pi", [0.0], math.pi),
    ("e", [0.0], math.e),
    ("abs(-3) + sqrt(16)", [0.0], 7.0),
    ("log(exp(2))", [0.0], 2.0),
    ("tanh(0) + cos(0) + sin(0)", [0.0], 1.0),
])
def test_grammar_values(src, point, expected):
    n = len(point)
    assert evaluate(parse(src, n), point) == pytest.approx(expected, rel=1e-15)


def test_gradient_of_exp_product():
    g = gradient(parse("exp(x1*x2)", 2), [1.0, 2.0])
    e2 = math.exp(2)
    assert g == pytest.approx([2 * e2, e2], rel=1e-14)


def test_kink_conventions():
    assert np.all(gradient(parse("abs(x1)", 1), [0.0]) == 0)
    assert np.all(gradient(parse("norm()", 2), [0.0, 0.0]) == 0)
    assert np.all(gradient(parse("hypot(x1,x2)", 2), [0.0, 0.0]) == 0)
    # left argument wins ties
    assert list(gradient(parse("min(x1,x2)", 2), [1.0, 1.0])) == [1.0, 0.0]
    assert list(gradient(parse("max(x1,x2)", 2), [1.0, 1.0])) == [1.0, 0.0]


def test_zero_base_powers():
    assert evaluate(parse("x1^0.5", 1), [0.0]) == 0.0
    assert gradient(parse("x1^1.5", 1), [0.0])[0] == 0.0
    with pytest.raises(DomainError):
        evaluate(parse("x1^(-0.5)", 1), [0.0])
    with pytest.raises(DomainError):
        evaluate(parse("x1^0.5", 1), [-1.0])
    assert evaluate(parse("x1^3", 1), [-2.0]) == -8.0


@pytest.mark.parametrize("src,n,exc", [
    ("2 x1", 1, ExprSyntaxError),
    ("x3", 2, VariableIndexError),
    ("foo(x1)", 1, UnknownIdentifierError),
    ("(x1", 1, ExprSyntaxError),
    ("x1 +", 1, ExprSyntaxError),
    ("", 1, ExprSyntaxError),
])
def test_parse_errors(src, n, exc):
    with pytest.raises(exc) as info:
        parse(src, n)
    assert info.value.position is not None


@pytest.mark.parametrize("src,point", [
    ("log(-1)", [0.0]), ("sqrt(x1)", [-1.0]), ("1/x1", [0.0]),
])
def test_domain_errors(src, point):
    with pytest.raises(DomainError):
        evaluate(parse(src, 1), point)


SMOOTH = [
    "exp(x1*x2)", "sin(x1)*cos(x2)", "x1^3 - 2*x1*x2 + x2^2", "log(1 + x1^2 + x2^2)",
    "sqrt(1 + x1^2) * tanh(x2)", "hypot(x1, x2 + 3)", "(x1 + 2)^x2",
    "norm()^3", "exp(-norm()^2) / (2 + x1)", "x1 / (1 + x2^2)",
]


@pytest.mark.parametrize("src", SMOOTH)
def test_gradients_match_finite_differences(src):
    rng = np.random.default_rng(7)
    e = parse(src, 2)
    X = rng.uniform(0.2, 1.5, size=(20, 2))
    _, G = value_and_grad(e, X)
    h = 1e-6
    for k in range(2):
        dX = np.zeros(2)
        dX[k] = h
        fd = (evaluate_many(e, X + dX) - evaluate_many(e, X - dX)) / (2 * h)
        np.testing.assert_allclose(G[:, k], fd, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("src", SMOOTH + ["-x1^2", "min(x1, -x2)", "2^-x1", "pi*e"])
def test_round_trip(src):
    e = parse(src, 2)
    assert parse(unparse(e), 2) == e


def test_vectorized_matches_pointwise():
    e = parse("sin(x1) + x2^2", 2)
    X = np.array([[0.1, 0.2], [1.0, -1.0], [2.0, 0.5]])
    v = evaluate_many(e, X)
    assert list(v) == [evaluate(e, x) for x in X]


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5),
       x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_gradient_is_linear(a, b, x, y):
    f, g = parse("sin(x1)*x2", 2), parse("x1^2 + exp(x2)", 2)
    combo = parse(f"({a!r})*(sin(x1)*x2) + ({b!r})*(x1^2 + exp(x2))", 2)
    expected = a * gradient(f, [x, y]) + b * gradient(g, [x, y])
    np.testing.assert_allclose(gradient(combo, [x, y]), expected, rtol=1e-12, atol=1e-12)
