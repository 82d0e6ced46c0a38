import math

import numpy as np
import pytest

from widedeg.expr import Expression, ExpressionError


@pytest.mark.parametrize(
    "text,expected",
    [
        ("1 + 2 * 3", 7.0),
        ("(1 + 2) * 3", 9.0),
        ("2 ^ 3 ^ 2", 512.0),
        ("-2^2", -4.0),
        ("8 / 4 / 2", 1.0),
        ("1.5e2 - .5", 149.5),
        ("exp(0) + abs(-3)", 4.0),
        ("min(2, 5) * max(2, 5)", 10.0),
        ("--3", 3.0),
    ],
)
def test_constants(text, expected):
    assert float(Expression(text)()) == pytest.approx(expected)


def test_variables_vectorized():
    e = Expression("x^2 + 2*y - exp(-s)")
    x = np.linspace(0, 1, 5)
    out = e(x=x, y=1.0, s=0.0)
    np.testing.assert_allclose(out, x**2 + 2 - 1)
    assert e.names == {"x", "y", "s"}
    assert not Expression("2 + exp(-s)").depends_on("x")


@pytest.mark.parametrize(
    "bad", ["", "1 +", "foo(1)", "z", "exp(1, 2)", "(1", "1 2", "3 $ 4", "max(1)"]
)
def test_rejects(bad):
    with pytest.raises(ExpressionError):
        Expression(bad)


def test_matches_python():
    e = Expression("abs(x - y) / (1 + x*x) ^ 0.5")
    for x, y in [(0.3, -1.2), (2.0, 5.0)]:
        assert float(e(x=x, y=y)) == pytest.approx(abs(x - y) / math.sqrt(1 + x * x), rel=1e-15)
