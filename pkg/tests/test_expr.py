import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expr_corpus import corpus
from linflow.errors import ArityError, EvalDomainError, ParseError, UnknownIdentifierError
from linflow.expr import parse


def test_eval_basics():
    e = parse("2*x1 + x2^2", dim=2)
    assert e.eval([3.0, 4.0]) == pytest.approx(22.0)


def test_precedence_and_right_assoc_power():
    assert parse("2 + 3 * 4", 0).eval([]) == 14.0
    assert parse("2 * 3 ^ 2", 0).eval([]) == 18.0
    assert parse("-x1^2", 1).eval([3.0]) == -9.0  # unary minus binds below ^
    assert parse("2^3^2", 0).eval([]) == 512.0


def test_functions():
    e = parse("sin(x1) * exp(x2) + sqrt(x1)", 2)
    x = [0.7, -0.3]
    assert e.eval(x) == pytest.approx(math.sin(0.7) * math.exp(-0.3) + math.sqrt(0.7))


def test_time_variable():
    e = parse("t * x1", 1, time_dependent=True)
    assert e.eval([3.0], t=2.0) == 6.0
    with pytest.raises(UnknownIdentifierError):
        parse("t * x1", 1, time_dependent=False)


def test_parse_error_reports_offset():
    with pytest.raises(ParseError) as exc:
        parse("x1 + * 2", 1)
    assert exc.value.offset == 5


def test_unknown_identifier_and_out_of_range_var():
    with pytest.raises(UnknownIdentifierError):
        parse("foo(x1)", 1)
    with pytest.raises(UnknownIdentifierError):
        parse("x3", 2)


def test_nonconstant_exponent_rejected():
    with pytest.raises(ParseError):
        parse("x1 ^ x1", 1)


def test_arity_error():
    with pytest.raises(ArityError):
        parse("sin(x1, x1)", 1)


def test_domain_error_names_subexpression():
    e = parse("log(x1 - 2)", 1)
    with pytest.raises(EvalDomainError) as exc:
        e.eval([1.0])
    assert "x1 - 2" in str(exc.value)


def test_gradient_matches_analytic():
    e = parse("sin(x1)*x2 + x2^3", 2)
    x = np.array([0.4, 1.2])
    jet = e.eval_jet(x)
    assert jet.value == pytest.approx(math.sin(0.4) * 1.2 + 1.2**3)
    assert jet.gradient == pytest.approx(
        [math.cos(0.4) * 1.2, math.sin(0.4) + 3 * 1.2**2]
    )


def test_time_partial():
    e = parse("t^2 * x1", 1, time_dependent=True)
    jet = e.eval_jet([3.0], t=2.0)
    assert jet.t_partial == pytest.approx(2 * 2.0 * 3.0)
    assert jet.gradient[0] == pytest.approx(2.0**2)  # d/dx1 = t^2


def _richardson_grad(e, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    g = np.empty(len(x))
    for i in range(len(x)):
        dx = np.zeros(len(x))
        dx[i] = 1.0
        d1 = (e.eval(x + h * dx) - e.eval(x - h * dx)) / (2 * h)
        d2 = (e.eval(x + h / 2 * dx) - e.eval(x - h / 2 * dx)) / h
        g[i] = (4 * d2 - d1) / 3
    return g


def test_corpus_ad_vs_finite_differences():
    rng = np.random.default_rng(42)
    for text in corpus(100, dim=3, seed=1):
        e = parse(text, 3)
        x = rng.uniform(-0.9, 0.9, size=3)
        jet = e.eval_jet(x)
        fd = _richardson_grad(e, x)
        scale = 1.0 + np.max(np.abs(jet.gradient))
        assert np.max(np.abs(jet.gradient - fd)) / scale < 1e-6, text


def test_corpus_parse_print_parse():
    for text in corpus(100, dim=3, seed=1):
        e = parse(text, 3)
        printed = str(e)
        again = parse(printed, 3)
        assert str(again) == printed
        x = [0.3, -0.5, 0.7]
        assert again.eval(x) == pytest.approx(e.eval(x), abs=0, rel=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(-2, 2, allow_nan=False),
    b=st.floats(-2, 2, allow_nan=False),
    x=st.floats(-1, 1, allow_nan=False),
)
def test_linearity_of_eval_in_coefficients(a, b, x):
    e = parse(f"{a!r}*x1 + {b!r}", 1)
    assert e.eval([x]) == pytest.approx(a * x + b, abs=1e-12)


def test_shift_vars_suspension_remap():
    e = parse("t * x1", 1, time_dependent=True)
    shifted = e.shift_vars(1, 2, time_to_var=0)
    # t -> x1, old x1 -> x2
    assert shifted.eval([2.0, 5.0]) == 10.0
    assert not shifted.time_dependent
