"""Measurement formulas: parsing, symbolic derivatives, evaluation.

Formulas are parsed with a Pratt parser into an immutable tree of frozen
dataclasses.  Binding powers, loosest to tightest::

    + -        10  left
    * /        20  left
    unary -    30  prefix
    ^          40  right

so ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt")


class ExprError(Exception):
    """Base class for everything the expression layer can raise."""


class ExprSyntaxError(ExprError):
    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"at position {position}: {message}")


class UnknownSymbolError(ExprError):
    def __init__(self, name: str, position: int | None = None):
        self.name = name
        self.position = position
        where = "" if position is None else f" at position {position}"
        super().__init__(f"unknown symbol {name!r}{where}")


class UnsupportedFunctionError(ExprError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(
            f"unsupported function {name!r} at position {position}; "
            f"expected one of {', '.join(FUNCTIONS)}"
        )


class EvaluationError(ExprError, ArithmeticError):
    """Domain error or non-finite result during evaluation."""


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str
    constant: bool = False


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Sym, Neg, BinOp, Call]

ZERO = Num(0.0)
ONE = Num(1.0)


def add(a: Expr, b: Expr) -> Expr:
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    return BinOp("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    return BinOp("^", a, b)


def free_symbols(e: Expr) -> set[str]:
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return free_symbols(e.operand)
    if isinstance(e, Call):
        return free_symbols(e.arg)
    return free_symbols(e.left) | free_symbols(e.right)


def variables_of(e: Expr) -> set[str]:
    """Free symbols that are not declared constants."""
    if isinstance(e, Sym):
        return set() if e.constant else {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return variables_of(e.operand)
    if isinstance(e, Call):
        return variables_of(e.arg)
    return variables_of(e.left) | variables_of(e.right)


# --------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),])
    """,
    re.VERBOSE,
)

_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            if tok == "**":
                tok = "^"
            tokens.append(_Token(kind, tok, pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: frozenset[str], constants: frozenset[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = variables
        self.constants = constants

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.advance()
        if tok.text != text:
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExprSyntaxError(tok.pos, f"expected {text!r}, found {found}")
        return tok

    def parse(self) -> Expr:
        e = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(tok.pos, f"unexpected {tok.text!r}")
        return e

    def expression(self, rbp: int) -> Expr:
        left = self.nud(self.advance())
        while True:
            tok = self.peek()
            lbp = _INFIX.get(tok.text, 0) if tok.kind == "op" else 0
            if lbp <= rbp:
                return left
            self.advance()
            if tok.text == "^":
                right = self.expression(lbp - 1)
                if variables_of(right):
                    raise ExprSyntaxError(
                        tok.pos, "exponent must not depend on a variable"
                    )
                left = power(left, right)
            else:
                left = BinOp(tok.text, left, self.expression(lbp))

    def nud(self, tok: _Token) -> Expr:
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            if self.peek().text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnsupportedFunctionError(tok.text, tok.pos)
                self.advance()
                arg = self.expression(0)
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in self.variables:
                return Sym(tok.text)
            if tok.text in self.constants:
                return Sym(tok.text, constant=True)
            if tok.text in FUNCTIONS:
                raise ExprSyntaxError(tok.pos, f"function {tok.text!r} needs an argument")
            raise UnknownSymbolError(tok.text, tok.pos)
        if tok.text == "(":
            e = self.expression(0)
            self.expect(")")
            return e
        if tok.text == "-":
            return Neg(self.expression(_UNARY_BP))
        if tok.text == "+":
            return self.expression(_UNARY_BP)
        if tok.kind == "end":
            raise ExprSyntaxError(tok.pos, "unexpected end of input")
        raise ExprSyntaxError(tok.pos, f"unexpected {tok.text!r}")


def parse(text: str, variables: Iterable[str], constants: Iterable[str] = ()) -> Expr:
    """Parse ``text`` into an expression tree.

    ``variables`` are the directly measured inputs; ``constants`` are exact
    quantities bound once per experiment and treated as having zero derivative.
    ``**`` is accepted as a synonym for ``^``.
    """
    variables = frozenset(variables)
    constants = frozenset(constants)
    if not text or not text.strip():
        raise ExprSyntaxError(0, "empty formula")
    if not variables and not constants:
        raise ExprError("no symbols declared")
    overlap = variables & constants
    if overlap:
        raise ExprError(f"declared as both variable and constant: {sorted(overlap)}")
    return _Parser(text, variables, constants).parse()


# --------------------------------------------------------------------------
# Printing

_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg) or (isinstance(e, Num) and math.copysign(1.0, e.value) < 0):
        return _UNARY_BP
    return 100


def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def to_text(e: Expr) -> str:
    """Render ``e`` in the same surface syntax :func:`parse` accepts."""
    if isinstance(e, Num):
        if math.copysign(1.0, e.value) < 0:
            return "-" + _fmt_num(-e.value)
        return _fmt_num(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        if _prec(e.operand) <= _UNARY_BP:
            inner = f"({inner})"
        return "-" + inner
    p = _PREC[e.op]
    left, right = to_text(e.left), to_text(e.right)
    if e.op == "^":
        # right-assoc; a negative base must be wrapped since -x^2 means -(x^2)
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < p:
            right = f"({right})"
    else:
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
    return f"{left} {e.op} {right}" if p < 20 else f"{left}{e.op}{right}"


# --------------------------------------------------------------------------
# Evaluation


def _check(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise EvaluationError(f"non-finite result in {what}")
    return x


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Sym):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise UnknownSymbolError(e.name) from None
    if isinstance(e, Neg):
        return -evaluate(e.operand, bindings)
    if isinstance(e, Call):
        x = evaluate(e.arg, bindings)
        f = e.func
        if f == "ln":
            if x <= 0:
                raise EvaluationError(f"ln of nonpositive argument {x!r}")
            return math.log(x)
        if f == "sqrt":
            if x < 0:
                raise EvaluationError(f"sqrt of negative argument {x!r}")
            return math.sqrt(x)
        try:
            return _check(getattr(math, f)(x), f)
        except OverflowError:
            raise EvaluationError(f"overflow in {f}") from None
    a = evaluate(e.left, bindings)
    b = evaluate(e.right, bindings)
    op = e.op
    if op == "+":
        return _check(a + b, "addition")
    if op == "-":
        return _check(a - b, "subtraction")
    if op == "*":
        return _check(a * b, "multiplication")
    if op == "/":
        if b == 0:
            raise EvaluationError("division by zero")
        return _check(a / b, "division")
    if a == 0 and b < 0:
        raise EvaluationError("division by zero (zero to a negative power)")
    if a < 0 and b != int(b):
        raise EvaluationError(f"negative base {a!r} to non-integer power {b!r}")
    try:
        return _check(a ** b, "power")
    except OverflowError:
        raise EvaluationError("overflow in power") from None


# --------------------------------------------------------------------------
# Simplification


def _is_num(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def simplify(e: Expr) -> Expr:
    """Constant folding plus 0/1 identities, applied bottom-up."""
    if isinstance(e, (Num, Sym)):
        return e
    if isinstance(e, Neg):
        inner = simplify(e.operand)
        if isinstance(inner, Num):
            return Num(-inner.value)
        if isinstance(inner, Neg):
            return inner.operand
        return Neg(inner)
    if isinstance(e, Call):
        arg = simplify(e.arg)
        if isinstance(arg, Num):
            try:
                return Num(evaluate(Call(e.func, arg), {}))
            except EvaluationError:
                pass
        return Call(e.func, arg)

    a, b, op = simplify(e.left), simplify(e.right), e.op
    if isinstance(a, Num) and isinstance(b, Num):
        try:
            return Num(evaluate(BinOp(op, a, b), {}))
        except EvaluationError:
            return BinOp(op, a, b)
    if op == "+":
        if _is_num(a, 0):
            return b
        if _is_num(b, 0):
            return a
        if isinstance(b, Neg):
            return simplify(sub(a, b.operand))
    elif op == "-":
        if _is_num(b, 0):
            return a
        if _is_num(a, 0):
            return simplify(Neg(b))
        if isinstance(b, Neg):
            return simplify(add(a, b.operand))
    elif op == "*":
        if _is_num(a, 0) or _is_num(b, 0):
            return ZERO
        if _is_num(a, 1):
            return b
        if _is_num(b, 1):
            return a
        if _is_num(a, -1):
            return simplify(Neg(b))
        if _is_num(b, -1):
            return simplify(Neg(a))
        if isinstance(a, Neg):
            return simplify(Neg(mul(a.operand, b)))
        if isinstance(b, Neg):
            return simplify(Neg(mul(a, b.operand)))
    elif op == "/":
        if _is_num(b, 1):
            return a
        if _is_num(a, 0):
            return ZERO
        if isinstance(a, Neg):
            return simplify(Neg(div(a.operand, b)))
    elif op == "^":
        if _is_num(b, 1):
            return a
        if _is_num(b, 0):
            return ONE
    return BinOp(op, a, b)


# --------------------------------------------------------------------------
# Differentiation


def _d(e: Expr, v: str) -> Expr:
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Sym):
        return ONE if (e.name == v and not e.constant) else ZERO
    if isinstance(e, Neg):
        return Neg(_d(e.operand, v))
    if isinstance(e, Call):
        u, du = e.arg, _d(e.arg, v)
        f = e.func
        if f == "sin":
            outer = Call("cos", u)
        elif f == "cos":
            outer = Neg(Call("sin", u))
        elif f == "tan":
            outer = div(ONE, power(Call("cos", u), Num(2.0)))
        elif f == "exp":
            outer = e
        elif f == "ln":
            return div(du, u)
        else:  # sqrt
            return div(du, mul(Num(2.0), e))
        return mul(outer, du)

    a, b, op = e.left, e.right, e.op
    if op == "+":
        return add(_d(a, v), _d(b, v))
    if op == "-":
        return sub(_d(a, v), _d(b, v))
    if op == "*":
        return add(mul(_d(a, v), b), mul(a, _d(b, v)))
    if op == "/":
        return div(sub(mul(_d(a, v), b), mul(a, _d(b, v))), power(b, Num(2.0)))
    # constant exponent, enforced at parse time
    return mul(mul(b, power(a, sub(b, ONE))), _d(a, v))


def differentiate(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``v``."""
    return simplify(_d(e, v))


def second_partial(e: Expr, vi: str, vj: str) -> Expr:
    return differentiate(differentiate(e, vi), vj)
