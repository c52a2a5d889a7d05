import math

import numpy as np
import pytest

from nlh.exprs import Expression, ExpressionError


@pytest.mark.parametrize("source,fn", [
    ("1 + 2*x", lambda x: 1 + 2 * x),
    ("x^2 - 3/x", lambda x: x**2 - 3 / x),
    ("-x^2", lambda x: -(x**2)),
    ("2^-x", lambda x: 2.0**-x),
    ("sin(x)*cos(2*x)", lambda x: np.sin(x) * np.cos(2 * x)),
    ("exp(-abs(x))", lambda x: np.exp(-np.abs(x))),
    ("min(x, 1) + max(x, -1)", lambda x: np.minimum(x, 1) + np.maximum(x, -1)),
    ("pi*x", lambda x: math.pi * x),
    ("x^2^2", lambda x: x**4),  # right-associative power
])
def test_matches_reference(source, fn):
    expr = Expression(source, ("x",))
    x = np.linspace(0.3, 3.0, 17)
    np.testing.assert_allclose(expr(x=x), fn(x), rtol=1e-14)


def test_scalar_evaluation():
    expr = Expression("u + 0.4*sin(u)", ("u",))
    assert expr(u=0.0) == 0.0
    assert isinstance(expr(u=0.5), float)


def test_multi_variable():
    expr = Expression("1 + 0.4*cos(x + z/2)*cos(r)", ("t", "x", "z", "r"))
    out = expr(t=0.0, x=np.zeros(3), z=np.ones(3), r=np.ones(3))
    assert out.shape == (3,)


@pytest.mark.parametrize("source", [
    "x +", "(x", "x)", "foo(x)", "min(x)", "sin(x, 1)", "x & y", "y",
])
def test_rejects_bad_input(source):
    with pytest.raises(ExpressionError):
        Expression(source, ("x",))


def test_missing_variable_at_call():
    expr = Expression("x", ("x",))
    with pytest.raises(ExpressionError):
        expr()
