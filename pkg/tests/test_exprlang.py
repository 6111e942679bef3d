import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skorokhod import errors as E
from skorokhod.exprlang import BinOp, Call, Const, Neg, Var, evaluate, parse, to_text

# (source, value at x = 3), each value worked out by hand
PRECEDENCE = [
    ("1 + 2 * 3", 7.0),
    ("(1 + 2) * 3", 9.0),
    ("2 ^ 3 ^ 2", 512.0),
    ("(2 ^ 3) ^ 2", 64.0),
    ("-2 ^ 2", -4.0),
    ("(-2) ^ 2", 4.0),
    ("2 ^ -1", 0.5),
    ("8 / 4 / 2", 1.0),
    ("8 - 4 - 2", 2.0),
    ("6 / 2 * 3", 9.0),
    ("2*x^2 - 1", 17.0),
    ("-x ^ 2", -9.0),
    ("--x", 3.0),
    ("x - -x", 6.0),
    ("abs(1 - x) * 2", 4.0),
    ("min(x, 1-x)", -2.0),
    ("max(x ^ 2, 10) / 5", 2.0),
    ("sqrt(x + 1) ^ 3", 8.0),
    ("exp(0) + log(1)", 1.0),
    ("2 ^ 2 * 3 + 4 / 2 ^ 2 - 1e1 * .5", 8.0),
]


@pytest.mark.parametrize("text, value", PRECEDENCE)
def test_precedence_table(text, value):
    assert evaluate(parse(text), 3.0) == value


def test_table_has_twenty_rows():
    assert len(PRECEDENCE) == 20


def test_tree_shapes():
    assert repr(parse("abs(x)")) == "Abs(Var)"
    assert repr(parse("2*x^2 - 1")) == "Sub(Mul(2, Pow(Var, 2)), 1)"
    assert repr(parse("-x^2")) == "Neg(Pow(Var, 2))"
    assert repr(parse("  min( x ,1 )")) == "Min(Var, 1)"


@pytest.mark.parametrize(
    "text, offset, fragment",
    [
        ("min(x, 1-x", 10, "expected ')'"),
        ("3 $", 2, "unexpected character"),
        ("", 0, "end of input"),
        ("2**x", 2, "found '*'"),
        ("abs x", 4, "expected '('"),
        ("foo(x)", 0, "unknown name"),
        ("min(x)", 5, "expected ','"),
        ("x)", 1, "found ')'"),
        ("abs(x, 1)", 5, "expected ')'"),
        # a non-breaking space takes two bytes in UTF-8
        ("\u00a0x $", 4, "unexpected character"),
    ],
)
def test_syntax_errors(text, offset, fragment):
    with pytest.raises(E.ExprSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset
    assert fragment in str(info.value)
    assert isinstance(info.value, ValueError)


def test_simple_evaluation():
    assert evaluate(parse("abs(x)"), -3) == 3.0
    assert evaluate(parse("exp(0)"), 123.0) == 1.0
    assert parse("x ^ 0.5")(4.0) == 2.0


@pytest.mark.parametrize(
    "text, x",
    [("1/x", 0.0), ("log(x)", 0.0), ("log(x)", -1.0), ("sqrt(x)", -1.0), ("x ^ -1", 0.0), ("x ^ 0.5", -4.0)],
)
def test_domain_errors(text, x):
    with pytest.raises(E.DomainError):
        evaluate(parse(text), x)


def test_arrays():
    xs = np.linspace(-2, 2, 9)
    assert np.array_equal(parse("abs(x)")(xs), np.abs(xs))
    assert np.array_equal(parse("3")(xs), np.full(9, 3.0))
    with pytest.raises(E.DomainError):
        parse("1/x")(xs)


def test_negative_constant_round_trip():
    e = BinOp("^", Const(-2.0), Var())
    assert evaluate(parse(to_text(e)), 3.0) == -8.0
    assert evaluate(parse(to_text(Const(math.inf))), 0.0) == math.inf


consts = st.floats(-10, 10, allow_nan=False).map(Const)
leaves = st.one_of(consts, st.just(Var()))


def extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from(["abs", "exp", "log", "sqrt"]), children).map(
            lambda t: Call(t[0], (t[1],))
        ),
        st.tuples(st.sampled_from(["min", "max"]), children, children).map(
            lambda t: Call(t[0], (t[1], t[2]))
        ),
        st.tuples(st.sampled_from(list("+-*/^")), children, children).map(
            lambda t: BinOp(t[0], t[1], t[2])
        ),
    )


trees = st.recursive(leaves, extend, max_leaves=12)


def outcome(e, xs):
    try:
        return evaluate(e, xs)
    except E.DomainError:
        return "domain"


@settings(max_examples=200, deadline=None)
@given(trees)
def test_print_parse_round_trip(e):
    xs = np.random.default_rng(0).uniform(-5, 5, 1000)
    a = outcome(e, xs)
    b = outcome(parse(to_text(e)), xs)
    if isinstance(a, str) or isinstance(b, str):
        assert a == b
    else:
        assert np.array_equal(a, b, equal_nan=True)
