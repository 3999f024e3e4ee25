import math

import pytest

from lbpadapt.errors import ExpressionError, ModelError
from lbpadapt.expr import parse_expression


def ev(text, x=(0.0,), y=None, k=1, allow_y=False):
    return parse_expression(text, k, allow_y=allow_y)(x, y)


def test_literals_and_arithmetic():
    assert ev("2.0") == 2.0
    assert ev("2 + 3*4") == 14.0
    assert ev("(2 + 3)*4") == 20.0
    assert ev("7/2") == 3.5
    assert ev("1.5e2") == 150.0
    assert ev(".5 + 0.25") == 0.75


def test_power_right_associative():
    assert ev("2^3^2") == 512.0
    assert ev("2^-1") == 0.5


def test_unary_minus_precedence():
    # unary minus binds looser than ^, like standard math notation
    assert ev("-2^2") == -4.0
    assert ev("(-2)^2") == 4.0
    assert ev("--3") == 3.0
    assert ev("4 - -3") == 7.0


def test_functions():
    assert ev("exp(0)") == 1.0
    assert ev("log(exp(2))") == pytest.approx(2.0, abs=1e-15)
    assert ev("exp(-x1^2)", x=(2.0,)) == pytest.approx(math.exp(-4.0))


def test_variables_two_slots():
    e = parse_expression("x1 - y1", 1, allow_y=True)
    assert e((3.0,), (1.0,)) == 2.0
    e2 = parse_expression("x2*y1", 2, allow_y=True)
    assert e2((0.0, 5.0), (2.0, 0.0)) == 10.0
    assert e2.uses_y


def test_y_rejected_when_not_allowed():
    with pytest.raises(ExpressionError):
        parse_expression("y1", 1, allow_y=False)


def test_dimension_mismatch():
    with pytest.raises(ExpressionError) as exc:
        parse_expression("x3", 2)
    assert "k=2" in str(exc.value)


def test_unknown_identifier_position():
    with pytest.raises(ExpressionError) as exc:
        parse_expression("1 + foo", 1)
    assert exc.value.pos == 4


def test_unclosed_parenthesis():
    with pytest.raises(ExpressionError) as exc:
        parse_expression("exp((x1-y1", 1, allow_y=True)
    assert "unclosed" in str(exc.value) or "end of expression" in str(exc.value)


def test_unexpected_character():
    with pytest.raises(ExpressionError) as exc:
        parse_expression("1 + $", 1)
    assert exc.value.pos is not None


def test_trailing_tokens_rejected():
    with pytest.raises(ExpressionError):
        parse_expression("1 2", 1)


def test_nonfinite_evaluation_raises():
    e = parse_expression("exp(x1)", 1)
    with pytest.raises(ModelError):
        e((1e6,))
    with pytest.raises(ModelError):
        parse_expression("log(x1)", 1)((-1.0,))
    with pytest.raises(ModelError):
        parse_expression("1/x1", 1)((0.0,))
