import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hamcal.exprlang import (
    DomainError,
    MissingBinding,
    ParseError,
    bump,
    evaluate,
    parse,
    to_source,
    to_sexpr,
)

# source -> documented tree; covers every ordered pair of binary operators
GOLDEN = [
    ("1+2+3", "(+ (+ 1 2) 3)"),
    ("1-2-3", "(- (- 1 2) 3)"),
    ("1+2-3", "(- (+ 1 2) 3)"),
    ("1-2+3", "(+ (- 1 2) 3)"),
    ("1+2*3", "(+ 1 (* 2 3))"),
    ("1*2+3", "(+ (* 1 2) 3)"),
    ("1-2/3", "(- 1 (/ 2 3))"),
    ("1/2-3", "(- (/ 1 2) 3)"),
    ("1*2/3", "(/ (* 1 2) 3)"),
    ("1/2*3", "(* (/ 1 2) 3)"),
    ("1/2/3", "(/ (/ 1 2) 3)"),
    ("2^3^2", "(^ 2 (^ 3 2))"),
    ("2*3^2", "(* 2 (^ 3 2))"),
    ("2^3*2", "(* (^ 2 3) 2)"),
    ("2^3+1", "(+ (^ 2 3) 1)"),
    ("1-2^3", "(- 1 (^ 2 3))"),
    ("-2^2", "(neg (^ 2 2))"),
    ("-q1*p1", "(* (neg q1) p1)"),
    ("max(0, 1-q1^2-p1^2)^3", "(^ (max 0 (- (- 1 (^ q1 2)) (^ p1 2))) 3)"),
    ("exp(t)*sin(x1)/2", "(/ (* (exp t) (sin x1)) 2)"),
]

BIND = {"q1": 0.3, "p1": -0.4, "t": 0.2, "x1": 0.7}


@pytest.mark.parametrize("src,tree", GOLDEN)
def test_golden_tree(src, tree):
    assert to_sexpr(parse(src)) == tree


@pytest.mark.parametrize("src", [g[0] for g in GOLDEN])
def test_golden_print_roundtrip(src):
    e = parse(src)
    again = parse(to_source(e))
    assert again == e
    b = {k: BIND[k] for k in e.free_vars}
    assert evaluate(again, b) == evaluate(e, b)


@pytest.mark.parametrize("src,bindings,value", [
    ("q1^2+p1^2", {"q1": 3, "p1": 4}, 25.0),
    ("-2^2", {}, -4.0),
    ("exp(t)*q1", {"t": 0.2, "q1": 2}, 2 * math.exp(0.2)),
    ("bump(0)", {}, 1.0),
    ("bump(1)", {}, 0.0),
    ("bump(2)", {}, 0.0),
    ("2**3", {}, 8.0),
    ("pi", {}, math.pi),
    ("pow(2, 0.5)", {}, math.sqrt(2)),
    ("min(abs(-3), 2)", {}, 2.0),
])
def test_examples(src, bindings, value):
    assert evaluate(parse(src), bindings) == pytest.approx(value, rel=1e-15, abs=0)


def test_exp_example_digits():
    assert evaluate("exp(t)*q1", {"t": 0.2, "q1": 2}) == pytest.approx(2.442805, abs=1e-6)


@pytest.mark.parametrize("src,offset", [("sin(", 4), ("1+", 2), ("(1", 2), ("1 2", 2), ("", 0)])
def test_syntax_error_offset(src, offset):
    with pytest.raises(ParseError) as info:
        parse(src)
    assert info.value.offset == offset


def test_unknown_function_and_arity():
    with pytest.raises(ParseError, match="unknown function"):
        parse("foo(1)")
    with pytest.raises(ParseError, match="takes 2"):
        parse("max(1)")


@pytest.mark.parametrize("src,b", [("log(x1)", {"x1": 0.0}), ("1/x1", {"x1": 0.0}),
                                   ("sqrt(x1)", {"x1": -1.0}), ("0^(-1)", {})])
def test_domain_errors(src, b):
    with pytest.raises(DomainError):
        evaluate(src, b)


def test_missing_binding():
    with pytest.raises(MissingBinding):
        evaluate("q1+p1", {"q1": 1.0})


def test_array_evaluation_matches_scalar():
    e = parse("bump(sqrt(q1^2+p1^2))*cos(t)")
    q = np.linspace(-1.2, 1.2, 7)
    arr = evaluate(e, {"q1": q, "p1": 0.1, "t": 0.3})
    assert np.array_equal(arr, [evaluate(e, {"q1": v, "p1": 0.1, "t": 0.3}) for v in q])


@given(st.floats(-3, 3))
def test_bump_support_and_range(s):
    v = float(bump(s))
    assert 0.0 <= v <= 1.0
    if abs(s) >= 1:
        assert v == 0.0


# random trees over a safe grammar: print, reparse, compare
leaf = st.one_of(st.sampled_from(["q1", "p1", "t"]),
                 st.floats(0.1, 9.0).map(lambda v: repr(round(v, 3))))


def _combine(children):
    ops = st.sampled_from(["+", "-", "*"])
    funcs = st.sampled_from(["sin", "cos", "abs", "bump"])
    return st.one_of(
        st.tuples(children, ops, children).map(lambda t: f"({t[0]}{t[1]}{t[2]})"),
        st.tuples(funcs, children).map(lambda t: f"{t[0]}({t[1]})"),
        children.map(lambda c: f"-{c}"),
        st.tuples(children, children).map(lambda t: f"max({t[0]}, {t[1]})"),
    )


exprs = st.recursive(leaf, _combine, max_leaves=12)


@given(exprs)
def test_roundtrip_property(src):
    e = parse(src)
    again = parse(to_source(e))
    assert again == e
    assert evaluate(again, BIND) == evaluate(e, BIND)
    assert e.free_vars <= {"q1", "p1", "t"}
