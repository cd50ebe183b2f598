import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import build_corpus
from grwlab import exprlang
from grwlab.exprlang import BinOp, Call, ExprDomainError, Num, ParseError, UnboundVariableError, Var
from grwlab.jets import jet_lift, jet_variables


def test_eds_warp_parses_as_power_of_quotient():
    assert exprlang.parse("t^(2/3)") == BinOp("^", Var("t"), BinOp("/", Num(2.0), Num(3.0)))


def test_exp_call():
    assert exprlang.parse("exp(t)") == Call("exp", (Var("t"),))


def test_malformed_reports_offset():
    with pytest.raises(ParseError) as exc:
        exprlang.parse("1 + * 2")
    assert exc.value.offset == 4


@pytest.mark.parametrize("src", ["(1 + 2", "foo(1)", "1 2", "exp(1, 2)", "", "3 $ 4", "pow(1)"])
def test_rejects_bad_input(src):
    with pytest.raises(ParseError) as exc:
        exprlang.parse(src)
    assert 0 <= exc.value.offset <= len(src.encode()) + 1


def test_offset_points_at_offending_token():
    with pytest.raises(ParseError) as exc:
        exprlang.parse("(1 + 2) + é")
    assert exc.value.offset == 10
    with pytest.raises(ParseError) as exc:
        exprlang.parse("sin(1")
    assert exc.value.offset == 5 and ")" in exc.value.expected


def test_evaluate_examples():
    assert exprlang.evaluate(exprlang.parse("t^(2/3)"), {"t": 8.0}) == pytest.approx(4.0, abs=1e-15)
    assert exprlang.evaluate(exprlang.parse("sqrt(2*a*t)"), {"a": 1.0, "t": 2.0}) == 2.0


def test_evaluate_on_jet():
    j = exprlang.evaluate(exprlang.parse("exp(t)"), {"t": jet_lift(0, 0.0, 1, 2)})
    assert np.allclose([j.partial((k,)) for k in range(3)], 1.0, atol=1e-15)


def test_unbound_and_domain_errors():
    with pytest.raises(UnboundVariableError):
        exprlang.evaluate(exprlang.parse("x + 1"), {})
    with pytest.raises(ExprDomainError):
        exprlang.evaluate(exprlang.parse("log(x)"), {"x": -1.0})
    with pytest.raises(ExprDomainError):
        exprlang.evaluate(exprlang.parse("sqrt(x)"), {"x": -1.0})


@pytest.mark.parametrize(
    "src,names", [("2*a*t", {"a", "t"}), ("3.5", set()), ("x1^2 + x2^2", {"x1", "x2"})]
)
def test_free_vars(src, names):
    assert exprlang.free_vars(exprlang.parse(src)) == names


def test_precedence():
    assert exprlang.evaluate(exprlang.parse("2+3*4"), {}) == 14
    assert exprlang.evaluate(exprlang.parse("2^3^2"), {}) == 512
    assert exprlang.evaluate(exprlang.parse("-2^2"), {}) == -4
    assert exprlang.evaluate(exprlang.parse("1e-3*2"), {}) == 2e-3


def test_corpus_round_trip_and_carrier_coherence():
    for text, point in build_corpus(50):
        e = exprlang.parse(text)
        assert exprlang.parse(exprlang.pretty(e)) == e
        env_f = {"x1": point[0], "x2": point[1]}
        env_j = dict(zip(("x1", "x2"), jet_variables(point, 3)))
        assert exprlang.evaluate(e, env_j).value == exprlang.evaluate(e, env_f)


names = st.sampled_from(["t", "x1", "x2", "a"])
leaves = st.one_of(st.floats(0.0, 100.0, allow_nan=False).map(Num), names.map(Var))


def _tree(children):
    return st.one_of(
        st.builds(Neg := exprlang.Neg, children),
        st.builds(BinOp, st.sampled_from(list("+-*/^")), children, children),
        st.builds(lambda f, a: Call(f, (a,)), st.sampled_from(["exp", "log", "sqrt", "sin", "cos"]), children),
        st.builds(lambda a, b: Call("pow", (a, b)), children, children),
    )


exprs = st.recursive(leaves, _tree, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(exprs)
def test_pretty_round_trip_property(e):
    assert exprlang.parse(exprlang.pretty(e)) == e


@settings(max_examples=100, deadline=None)
@given(exprs)
def test_free_vars_subset_of_names(e):
    assert exprlang.free_vars(e) <= {"t", "x1", "x2", "a"}


def test_pow_float_matches_math():
    e = exprlang.parse("pow(x, 1.5)")
    assert exprlang.evaluate(e, {"x": 2.0}) == math.pow(2.0, 1.5)
