"""Expression trees for implicit equations.

Text is parsed into immutable trees of :class:`Const`, :class:`Var`,
:class:`Unary` and :class:`Binary` nodes.  Trees support exact partial
derivatives (:func:`diff`), tree-walking evaluation (:func:`evaluate`) and
compilation into plain Python callables for the hot loops of the integrators.

Grammar::

    equation := expr ('=' expr)?
    expr     := term (('+'|'-') term)*
    term     := unary (('*'|'/') unary)*
    unary    := ('-'|'+') unary | power
    power    := base ('^' exponent)?
    exponent := ('-'|'+') exponent | base ('^' exponent)?      (must be constant)
    base     := number | ident | func '(' expr ')' | '(' expr ')'
    func     := sin | cos | exp | ln | sqrt | neg

Jet variables are named ``u<alpha>_<k>`` (k-th derivative of the alpha-th
unknown) with ``u<alpha>`` an alias of ``u<alpha>_0``; ``t`` is the
independent variable.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ExprSyntaxError, UndeclaredVariableError

__all__ = [
    "Expression",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "FUNCTIONS",
    "parse",
    "parse_equation",
    "jet_variable_names",
    "evaluate",
    "diff",
    "simplify",
    "substitute",
    "unparse",
    "compile_functions",
    "as_expression",
]

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "neg")

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_UNARY = 3
_PREC_POW = 4
_PREC_ATOM = 5


class Expression:
    """Base class of expression nodes.  Instances are immutable."""

    def diff(self, var: str) -> "Expression":
        return diff(self, var)

    def evaluate(self, env) -> float:
        return evaluate(self, env)

    def __str__(self) -> str:
        return unparse(self)

    @cached_property
    def variables(self) -> frozenset:
        return frozenset(self._variables())

    def _variables(self) -> Iterable[str]:
        return ()

    # arithmetic sugar; all builders simplify lightly
    def __add__(self, other):
        return add(self, as_expression(other))

    def __radd__(self, other):
        return add(as_expression(other), self)

    def __sub__(self, other):
        return sub(self, as_expression(other))

    def __rsub__(self, other):
        return sub(as_expression(other), self)

    def __mul__(self, other):
        return mul(self, as_expression(other))

    def __rmul__(self, other):
        return mul(as_expression(other), self)

    def __truediv__(self, other):
        return div(self, as_expression(other))

    def __rtruediv__(self, other):
        return div(as_expression(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, float(exponent))


@dataclass(frozen=True, eq=True, repr=False)
class Const(Expression):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Var(Expression):
    name: str

    def _variables(self):
        yield self.name

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Unary(Expression):
    op: str
    arg: Expression

    def _variables(self):
        return self.arg.variables

    def __repr__(self):
        return f"Unary({self.op!r}, {self.arg!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Binary(Expression):
    op: str
    left: Expression
    right: Expression

    def _variables(self):
        return self.left.variables | self.right.variables

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expression(value) -> Expression:
    if isinstance(value, Expression):
        return value
    return Const(float(value))


def _is_const(e: Expression, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# ---------------------------------------------------------------------------
# simplifying builders


def _fold(fn: Callable[[], float]) -> Const | None:
    try:
        v = fn()
    except (ZeroDivisionError, ValueError, OverflowError):
        return None
    if not math.isfinite(v):
        return None
    return Const(v)


def add(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Binary("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if _is_const(a) and _is_const(b):
        folded = _fold(lambda: a.value / b.value)
        if folded is not None:
            return folded
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Binary("/", a, b)


def power(a: Expression, c: float) -> Expression:
    c = float(c)
    if c == 0.0:
        return ONE
    if c == 1.0:
        return a
    if _is_const(a):
        folded = _fold(lambda: _pow(a.value, c))
        if folded is not None:
            return folded
    return Binary("^", a, Const(c))


def neg(a: Expression) -> Expression:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def apply(fname: str, a: Expression) -> Expression:
    if fname == "neg":
        return neg(a)
    if _is_const(a):
        folded = _fold(lambda: _MATH[fname](a.value))
        if folded is not None:
            return folded
    return Unary(fname, a)


def _pow(base: float, c: float) -> float:
    if c.is_integer():
        return base ** int(c)
    return math.pow(base, c)


def _ln(x: float) -> float:
    if x <= 0.0:
        raise ValueError("ln of non-positive number")
    return math.log(x)


_MATH = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": _ln,
    "sqrt": math.sqrt,
    "neg": lambda x: -x,
}


# ---------------------------------------------------------------------------
# tokenizer and parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()=]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, resolve: Callable[[str, int], Expression]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.resolve = resolve

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.next()
        if val != value or kind != "op":
            raise ExprSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", self.text, pos)

    def error(self, message: str):
        raise ExprSyntaxError(message, self.text, self.peek()[2])

    def parse_equation(self) -> Expression:
        lhs = self.parse_expr()
        kind, val, pos = self.peek()
        if kind == "op" and val == "=":
            self.next()
            rhs = self.parse_expr()
            lhs = Binary("-", lhs, rhs)
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return lhs

    def parse_single(self) -> Expression:
        e = self.parse_expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return e

    def parse_expr(self) -> Expression:
        left = self.parse_term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                left = Binary(val, left, self.parse_term())
            else:
                return left

    def parse_term(self) -> Expression:
        left = self.parse_unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                left = Binary(val, left, self.parse_unary())
            else:
                return left

    def parse_unary(self) -> Expression:
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.next()
            operand = self.parse_unary()
            if val == "+":
                return operand
            if isinstance(operand, Const):
                return Const(-operand.value)
            return Unary("neg", operand)
        return self.parse_power()

    def parse_power(self) -> Expression:
        base = self.parse_base()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.next()
            exponent = self.parse_exponent()
            try:
                value = evaluate(exponent, {})
            except (KeyError, DomainError):
                raise ExprSyntaxError("exponent must be a constant", self.text, pos + 1) from None
            base = Binary("^", base, Const(value))
        return base

    def parse_exponent(self) -> Expression:
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.next()
            operand = self.parse_exponent()
            return operand if val == "+" else neg(operand)
        return self.parse_power()

    def parse_base(self) -> Expression:
        kind, val, pos = self.next()
        if kind == "number":
            return Const(float(val))
        if kind == "ident":
            nkind, nval, _ = self.peek()
            if nkind == "op" and nval == "(":
                if val not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {val!r}", self.text, pos)
                self.next()
                arg = self.parse_expr()
                self.expect(")")
                return neg(arg) if val == "neg" else Unary(val, arg)
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val!r} needs an argument", self.text, pos)
            return self.resolve(val, pos)
        if kind == "op" and val == "(":
            inner = self.parse_expr()
            self.expect(")")
            return inner
        raise ExprSyntaxError(
            f"unexpected {'end of input' if kind == 'end' else repr(val)}", self.text, pos
        )


_JET_RE = re.compile(r"^u([1-9]\d*)(?:_(\d+))?$")


def jet_variable_names(m: int, q: int) -> tuple[str, ...]:
    """Ambient coordinate names in storage order ``t, u1_0..u1_q, u2_0, ...``."""
    names = ["t"]
    for alpha in range(1, m + 1):
        names.extend(f"u{alpha}_{k}" for k in range(q + 1))
    return tuple(names)


def _make_resolver(variables: Iterable[str], constants: Mapping[str, float] | None, jet: tuple[int, int] | None):
    declared = set(variables)
    consts = dict(constants or {})

    def resolve(name: str, pos: int) -> Expression:
        if name in consts:
            return Const(consts[name])
        if jet is not None:
            m = _JET_RE.match(name)
            if m is not None and m.group(2) is None:
                name = f"u{m.group(1)}_0"
        if name in declared:
            return Var(name)
        if name == "pi":
            return Const(math.pi)
        raise UndeclaredVariableError(name, pos)

    return resolve


def parse(text: str, variables: Iterable[str], constants: Mapping[str, float] | None = None) -> Expression:
    """Parse a single expression over the given variable names."""
    return _Parser(text, _make_resolver(variables, constants, None)).parse_single()


def parse_equation(
    text: str, signature: tuple[int, int], parameters: Mapping[str, float] | None = None
) -> Expression:
    """Parse ``lhs`` or ``lhs = rhs`` into the left-hand side of ``F = 0``.

    ``signature`` is ``(m, q)``; parameters are substituted as constants.
    """
    m, q = signature
    names = jet_variable_names(m, q)
    return _Parser(text, _make_resolver(names, parameters, (m, q))).parse_equation()


# ---------------------------------------------------------------------------
# evaluation


def _env_of(point) -> Mapping[str, float]:
    if isinstance(point, Mapping):
        return point
    as_env = getattr(point, "as_env", None)
    if as_env is not None:
        return as_env()
    raise TypeError(f"cannot evaluate at {type(point).__name__}")


def evaluate(expr: Expression, point) -> float:
    """Evaluate ``expr`` at a mapping of variable values or a JetPoint.

    Raises :class:`DomainError` carrying the offending subtree on division by
    zero, logarithms or roots of non-positive numbers and overflow.
    """
    return _eval(expr, _env_of(point))


def _eval(e: Expression, env: Mapping[str, float]) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(env[e.name])
    if isinstance(e, Unary):
        x = _eval(e.arg, env)
        try:
            return _MATH[e.op](x)
        except (ValueError, OverflowError, ZeroDivisionError):
            raise DomainError(f"{e.op} undefined at {x!r}", e) from None
    if isinstance(e, Binary):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        try:
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "/":
                return a / b
            return _pow(a, b)
        except ZeroDivisionError:
            raise DomainError("division by zero", e) from None
        except (ValueError, OverflowError):
            raise DomainError(f"power undefined for base {a!r}", e) from None
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# differentiation and rewriting


def diff(expr: Expression, var: str) -> Expression:
    """Exact partial derivative with respect to the variable named ``var``."""
    if var not in expr.variables:
        return ZERO
    if isinstance(expr, Var):
        return ONE
    if isinstance(expr, Unary):
        a = expr.arg
        da = diff(a, var)
        op = expr.op
        if op == "neg":
            return neg(da)
        if op == "sin":
            return mul(apply("cos", a), da)
        if op == "cos":
            return mul(neg(apply("sin", a)), da)
        if op == "exp":
            return mul(apply("exp", a), da)
        if op == "ln":
            return div(da, a)
        if op == "sqrt":
            return div(da, mul(Const(2.0), apply("sqrt", a)))
        raise ValueError(f"unknown function {op!r}")
    if isinstance(expr, Binary):
        l, r = expr.left, expr.right
        op = expr.op
        if op == "^":
            c = r.value
            return mul(mul(Const(c), power(l, c - 1.0)), diff(l, var))
        dl, dr = diff(l, var), diff(r, var)
        if op == "+":
            return add(dl, dr)
        if op == "-":
            return sub(dl, dr)
        if op == "*":
            return add(mul(dl, r), mul(l, dr))
        if op == "/":
            if _is_const(dr, 0.0):
                return div(dl, r)
            return div(sub(mul(dl, r), mul(l, dr)), power(r, 2.0))
    raise TypeError(f"not an expression: {expr!r}")


def _rebuild(e: Expression, leaf: Callable[[Expression], Expression]) -> Expression:
    if isinstance(e, (Const, Var)):
        return leaf(e)
    if isinstance(e, Unary):
        return apply(e.op, _rebuild(e.arg, leaf))
    l = _rebuild(e.left, leaf)
    r = _rebuild(e.right, leaf)
    if e.op == "+":
        return add(l, r)
    if e.op == "-":
        return sub(l, r)
    if e.op == "*":
        return mul(l, r)
    if e.op == "/":
        return div(l, r)
    return power(l, r.value)


def simplify(expr: Expression) -> Expression:
    """Constant folding and neutral-element elimination; nothing more."""
    return _rebuild(expr, lambda leaf: leaf)


def substitute(expr: Expression, mapping: Mapping[str, Expression | float]) -> Expression:
    subs = {k: as_expression(v) for k, v in mapping.items()}
    return _rebuild(expr, lambda leaf: subs.get(leaf.name, leaf) if isinstance(leaf, Var) else leaf)


# ---------------------------------------------------------------------------
# printing


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _fmt(e: Expression) -> tuple[str, int]:
    if isinstance(e, Const):
        s = _fmt_number(e.value)
        return s, (_PREC_UNARY if e.value < 0 else _PREC_ATOM)
    if isinstance(e, Var):
        return e.name, _PREC_ATOM
    if isinstance(e, Unary):
        inner, p = _fmt(e.arg)
        if e.op == "neg":
            if p <= _PREC_UNARY:
                inner = f"({inner})"
            return "-" + inner, _PREC_UNARY
        return f"{e.op}({inner})", _PREC_ATOM
    op = e.op
    if op == "^":
        base, p = _fmt(e.left)
        if p <= _PREC_POW:
            base = f"({base})"
        expo = _fmt_number(e.right.value)
        if e.right.value < 0:
            expo = f"({expo})"
        return f"{base}^{expo}", _PREC_POW
    prec = _PREC_ADD if op in "+-" else _PREC_MUL
    ls, lp = _fmt(e.left)
    rs, rp = _fmt(e.right)
    if lp < prec:
        ls = f"({ls})"
    if rp <= prec or rp == _PREC_UNARY:
        rs = f"({rs})"
    elif op in "+-" and rs.startswith("-"):
        # a leading minus belongs to the first factor of a product chain
        return f"{ls}{'-' if op == '+' else '+'}{rs[1:]}", prec
    return f"{ls}{op}{rs}", prec


def unparse(expr: Expression) -> str:
    """Render with minimal parentheses; ``parse(unparse(e))`` evaluates like ``e``."""
    return _fmt(expr)[0]


# ---------------------------------------------------------------------------
# compilation


def _code(e: Expression, index: Mapping[str, int], np_backend: bool) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return f"v{index[e.name]}"
    if isinstance(e, Unary):
        inner = _code(e.arg, index, np_backend)
        if e.op == "neg":
            return f"(-{inner})"
        return f"_{e.op}({inner})"
    l = _code(e.left, index, np_backend)
    if e.op == "^":
        c = e.right.value
        if c.is_integer():
            return f"({l})**{int(c)}"
        return f"_pow({l}, {c!r})"
    r = _code(e.right, index, np_backend)
    return f"({l} {e.op} {r})"


_NP_NAMESPACE = {
    "_sin": np.sin,
    "_cos": np.cos,
    "_exp": np.exp,
    "_ln": np.log,
    "_sqrt": np.sqrt,
    "_pow": np.power,
}

_MATH_NAMESPACE = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": math.exp,
    "_ln": _ln,
    "_sqrt": math.sqrt,
    "_pow": math.pow,
}


def compile_functions(
    exprs: Sequence[Expression], variables: Sequence[str], backend: str = "math"
) -> Callable:
    """Compile expressions into ``f(x) -> ndarray`` over ordered ``variables``.

    With ``backend="numpy"`` the callable accepts arrays of points of shape
    ``(..., len(variables))`` and returns shape ``(..., len(exprs))``; domain
    violations then yield ``nan``/``inf`` instead of raising.
    """
    exprs = tuple(exprs)
    variables = tuple(variables)
    index = {name: i for i, name in enumerate(variables)}
    for e in exprs:
        missing = e.variables - index.keys()
        if missing:
            raise UndeclaredVariableError(sorted(missing)[0])
    np_backend = backend == "numpy"
    used = sorted({index[v] for e in exprs for v in e.variables})
    lines = ["def _f(x):"]
    for i in used:
        lines.append(f"    v{i} = x[..., {i}]" if np_backend else f"    v{i} = x[{i}]")
    body = ", ".join(_code(e, index, np_backend) for e in exprs)
    lines.append(f"    return ({body}{',' if len(exprs) == 1 else ''})")
    namespace = dict(_NP_NAMESPACE if np_backend else _MATH_NAMESPACE)
    exec(compile("\n".join(lines), "<vessiot_kit.expr>", "exec"), namespace)
    raw = namespace["_f"]

    if np_backend:
        def f_np(x):
            x = np.asarray(x, dtype=float)
            with np.errstate(all="ignore"):
                out = raw(x)
            shape = x.shape[:-1]
            return np.stack([np.broadcast_to(np.asarray(o, dtype=float), shape) for o in out], axis=-1)

        return f_np

    def f(x):
        if isinstance(x, np.ndarray):
            x = x.tolist()
        try:
            return np.array(raw(x), dtype=float)
        except (ZeroDivisionError, ValueError, OverflowError):
            env = {name: float(x[i]) for i, name in enumerate(variables)}
            for e in exprs:
                _eval(e, env)
            raise DomainError("evaluation failed") from None

    return f
