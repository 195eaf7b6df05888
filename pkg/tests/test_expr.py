import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inaccuracy import expr as ex
from inaccuracy.expr import BinOp, Num, Sym

import exprgen

VISC = dict(variables=["t", "t0"], constants=["c"])


def ev(text, variables=(), constants=(), **bindings):
    return ex.evaluate(ex.parse(text, variables or list(bindings), constants), bindings)


# --- parse ---------------------------------------------------------------


def test_parse_division_of_symbols():
    assert ex.parse("t/t0", ["t", "t0"]) == BinOp("/", Sym("t"), Sym("t0"))


def test_parse_single_symbol():
    assert ex.parse("x1", ["x1"]) == Sym("x1")


def test_parse_product_of_squared_sum():
    e = ex.parse("x1*(x2+3)^2", ["x1", "x2"])
    assert e == BinOp("*", Sym("x1"), BinOp("^", BinOp("+", Sym("x2"), Num(3.0)), Num(2.0)))
    assert ex.evaluate(e, {"x1": 2, "x2": 1}) == 32


def test_constants_are_marked():
    e = ex.parse("c*t", ["t"], ["c"])
    assert e == BinOp("*", Sym("c", constant=True), Sym("t"))
    assert ex.variables_of(e) == {"t"}


@pytest.mark.parametrize(
    "text, x, expected",
    [
        ("-x^2", 3, -9),  # power binds tighter than unary minus
        ("2^3^2", 0, 512),  # right associative
        ("2^-1", 0, 0.5),
        ("1 - 2 - 3", 0, -4),
        ("12 / 3 / 2", 0, 2),
        ("2 + 3 * 4", 0, 14),
        ("-2 * 3", 0, -6),
        ("x ** 2", 4, 16),
        ("1.5e-3 * 2", 0, 3e-3),
        ("+x", 5, 5),
    ],
)
def test_precedence(text, x, expected):
    assert ev(text, ["x"], x=x) == pytest.approx(expected)


@pytest.mark.parametrize("text, pos", [("x +", 3), ("(x", 2), ("x $ 2", 2), ("x x", 2), (")", 0)])
def test_syntax_errors_carry_position(text, pos):
    with pytest.raises(ex.ExprSyntaxError) as info:
        ex.parse(text, ["x"])
    assert info.value.position == pos


def test_unknown_symbol():
    with pytest.raises(ex.UnknownSymbolError) as info:
        ex.parse("x + y", ["x"])
    assert info.value.name == "y"


def test_unsupported_function():
    with pytest.raises(ex.UnsupportedFunctionError) as info:
        ex.parse("abs(x)", ["x"])
    assert info.value.name == "abs"


def test_variable_exponent_rejected():
    with pytest.raises(ex.ExprSyntaxError, match="exponent"):
        ex.parse("x^y", ["x", "y"])
    # constants may appear in exponents
    assert ev("x^c", ["x"], ["c"], x=2, c=3) == 8


def test_empty_formula():
    with pytest.raises(ex.ExprSyntaxError):
        ex.parse("  ", ["x"])


# --- differentiate ---------------------------------------------------------


def test_derivative_of_product():
    assert ex.differentiate(ex.parse("x1*x2", ["x1", "x2"]), "x1") == Sym("x2")


def test_quotient_rule_on_viscometer_core():
    e = ex.parse("c*t/t0", **VISC)
    d = ex.differentiate(e, "t0")
    for t, t0, c in [(11.84, 39.3, 1.1), (2.0, 3.0, -0.5)]:
        b = {"t": t, "t0": t0, "c": c}
        assert ex.evaluate(d, b) == pytest.approx(-c * t / t0**2, rel=1e-14)


def test_constant_has_zero_derivative():
    e = ex.parse("c*t", ["t"], ["c"])
    assert ex.differentiate(e, "c") == Num(0.0)


def test_chain_rule_against_finite_difference():
    e = ex.parse("sin(x1^2)", ["x1"])
    d = ex.evaluate(ex.differentiate(e, "x1"), {"x1": 0.7})
    h = 1e-6
    fd = (math.sin((0.7 + h) ** 2) - math.sin((0.7 - h) ** 2)) / (2 * h)
    assert d == pytest.approx(fd, rel=1e-8)


@pytest.mark.parametrize(
    "text, x, expected",
    [
        ("cos(x)", 0.3, -math.sin(0.3)),
        ("tan(x)", 0.3, 1 / math.cos(0.3) ** 2),
        ("exp(2*x)", 0.3, 2 * math.exp(0.6)),
        ("ln(x)", 0.3, 1 / 0.3),
        ("sqrt(x)", 0.3, 0.5 / math.sqrt(0.3)),
        ("x^-2", 0.3, -2 * 0.3**-3),
        ("-x", 0.3, -1.0),
        ("1/x", 0.3, -1 / 0.09),
    ],
)
def test_elementary_derivatives(text, x, expected):
    d = ex.differentiate(ex.parse(text, ["x"]), "x")
    assert ex.evaluate(d, {"x": x}) == pytest.approx(expected, rel=1e-14)


# --- second partials -------------------------------------------------------


def test_mixed_partial_viscometer():
    e = ex.parse("c*t/t0", **VISC)
    d = ex.second_partial(e, "t", "t0")
    b = {"t": 11.84, "t0": 39.3, "c": 1.1}
    assert ex.evaluate(d, b) == pytest.approx(-1.1 / 39.3**2, rel=1e-14)
    # relative-mode coefficient t*t0/f * d2f = -1 -> influence 1
    f = 1.1 * 11.84 / 39.3
    assert abs(11.84 * 39.3 / f * ex.evaluate(d, b)) == pytest.approx(1.0, rel=1e-14)


def test_second_partial_of_identity_is_zero():
    assert ex.second_partial(ex.parse("x1", ["x1"]), "x1", "x1") == Num(0.0)


def test_second_partial_t0_t0():
    e = ex.parse("c*t/t0", **VISC)
    d = ex.second_partial(e, "t0", "t0")
    b = {"t": 11.84, "t0": 39.3, "c": 1.1}
    assert ex.evaluate(d, b) == pytest.approx(2 * 1.1 * 11.84 / 39.3**3, rel=1e-14)
    f = 1.1 * 11.84 / 39.3
    assert abs(39.3**2 / f * ex.evaluate(d, b)) == pytest.approx(2.0, rel=1e-14)


# --- evaluate ----------------------------------------------------------------


def test_evaluate_constant():
    assert ex.evaluate(Num(5.0), {}) == 5


def test_evaluate_table_means():
    assert ev("t/t0", t=11.84, t0=39.3) == pytest.approx(0.3012722646, rel=1e-9)


def test_evaluate_square_of_negative():
    assert ev("x^2", x=-3) == 9


@pytest.mark.parametrize(
    "text, x",
    [("1/x", 0.0), ("ln(x)", 0.0), ("ln(x)", -1.0), ("sqrt(x)", -1.0), ("x^0.5", -2.0),
     ("x^-1", 0.0), ("exp(x)", 1e6)],
)
def test_domain_errors(text, x):
    with pytest.raises(ex.EvaluationError):
        ev(text, x=x)


def test_unbound_symbol():
    with pytest.raises(ex.UnknownSymbolError):
        ex.evaluate(ex.parse("x+y", ["x", "y"]), {"x": 1})


# --- simplify ----------------------------------------------------------------


@pytest.mark.parametrize(
    "text, expected",
    [("x*1", Sym("x")), ("0 + 3*2", Num(6.0)), ("x*0 + y", Sym("y")), ("x^1", Sym("x")),
     ("--x", Sym("x")), ("0/x", Num(0.0)), ("x - 0", Sym("x"))],
)
def test_simplify_identities(text, expected):
    assert ex.simplify(ex.parse(text, ["x", "y"])) == expected


# --- properties --------------------------------------------------------------

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _case(seed, depth=4):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        e = exprgen.random_expr(rng, depth)
        point = exprgen.nonsingular_point(e, rng)
        if point is not None:
            return e, point
    return None, None


def _val(e, point):
    return ex.evaluate(e, {**point, "c": exprgen.CONST_VALUE})


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_first_partials_match_finite_differences(seed):
    e, point = _case(seed)
    if e is None:
        return
    for v in exprgen.VARS:
        d = _val(ex.differentiate(e, v), point)
        assert exprgen.rel_err(d, exprgen.central_first(e, point, v), 1.0) <= 1e-6


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_mixed_partials_commute(seed):
    e, point = _case(seed)
    if e is None:
        return
    for vi in exprgen.VARS:
        for vj in exprgen.VARS:
            a = _val(ex.second_partial(e, vi, vj), point)
            b = _val(ex.second_partial(e, vj, vi), point)
            assert exprgen.rel_err(a, b, 1.0) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_simplify_preserves_value(seed):
    rng = np.random.default_rng(seed)
    e = exprgen.random_expr(rng, 4)
    point = exprgen.nonsingular_point(e, rng)
    if point is None:
        return
    a, b = _val(e, point), _val(ex.simplify(e), point)
    assert exprgen.rel_err(a, b, 1.0) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_print_parse_round_trip(seed):
    rng = np.random.default_rng(seed)
    e = exprgen.random_expr(rng, 4)
    text = ex.to_text(e)
    again = ex.parse(text, exprgen.VARS, exprgen.CONSTS)
    assert ex.to_text(again) == ex.to_text(ex.parse(ex.to_text(again), exprgen.VARS, exprgen.CONSTS))
    point = exprgen.nonsingular_point(e, rng)
    if point is not None:
        assert exprgen.rel_err(_val(e, point), _val(again, point), 1.0) <= 1e-12
