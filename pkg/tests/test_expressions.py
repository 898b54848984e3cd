import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmefront.errors import ExpressionParseError
from pmefront.expressions import compile_expression


class TestEvaluation:
    def test_polynomial(self):
        e = compile_expression("1 - x^2")
        assert e(x=0.5) == pytest.approx(0.75)

    def test_sin_pi_x(self):
        e = compile_expression("sin(pi*x)")
        assert abs(e(x=1.0)) <= 1e-15

    def test_bound_constant(self):
        e = compile_expression("(m-1)*x", constants={"m": 2.0})
        assert e(x=3.0) == pytest.approx(3.0)

    def test_vectorized(self):
        e = compile_expression("exp(-x)*cos(t)")
        x = np.linspace(0, 1, 11)
        np.testing.assert_allclose(e(x=x, t=0.3),
                                   np.exp(-x) * np.cos(0.3))

    def test_precedence_and_unary(self):
        assert compile_expression("2 + 3*4")() == pytest.approx(14.0)
        assert compile_expression("-2^2")() == pytest.approx(-4.0)
        assert compile_expression("(2+3)*4")() == pytest.approx(20.0)
        assert compile_expression("2^3^2")() == pytest.approx(512.0)

    def test_division(self):
        assert compile_expression("x/4")(x=2.0) == pytest.approx(0.5)


class TestErrors:
    @pytest.mark.parametrize("bad", ["1 +", "sin(x", "x**2", "foo(3)",
                                     ")", "1..2"])
    def test_parse_errors_carry_position(self, bad):
        with pytest.raises(ExpressionParseError) as exc:
            compile_expression(bad)()
        assert exc.value.position >= 0

    def test_unknown_name(self):
        with pytest.raises(ExpressionParseError):
            compile_expression("q + 1")(x=1.0)


@given(a=st.floats(-10, 10, allow_nan=False),
       b=st.floats(-10, 10, allow_nan=False),
       x=st.floats(-3, 3, allow_nan=False))
@settings(max_examples=60, deadline=None)
def test_linear_combination_matches_python(a, b, x):
    e = compile_expression("a*x + b", constants={"a": a, "b": b})
    assert e(x=x) == pytest.approx(a * x + b, rel=1e-12, abs=1e-12)


@given(st.integers(0, 6), st.floats(0.1, 2.0))
@settings(max_examples=30, deadline=None)
def test_power_tower_matches_numpy(k, x):
    e = compile_expression("x^" + str(k))
    assert e(x=x) == pytest.approx(x ** k, rel=1e-12)
