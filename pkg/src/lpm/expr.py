"""Scalar expression language for ``A(t)`` entries and ``f(t, u)`` components.

Grammar::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := number | 't' | 'u' index | func '(' expr ')' | '(' expr ')' | name
    func  := sin | cos | tan | tanh | exp | log | sqrt | abs

``^`` binds tighter than unary minus and is right-associative.  Named
constants are substituted by value at parse time.

Evaluation is vectorised: ``t`` may be a scalar or an array and ``u`` an
array whose last axis has length ``n``.  Derivatives with respect to ``u``
come from a forward-mode dual-number sweep over the tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    EvalDomainError,
    ExprSyntaxError,
    IndexOutOfRange,
    NotDifferentiable,
    UnknownIdentifier,
)

FUNCTIONS = ("sin", "cos", "tan", "tanh", "exp", "log", "sqrt", "abs")


# -- tree ------------------------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    pos: int


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class TimeVar(Expr):
    pass


@dataclass(frozen=True)
class StateVar(Expr):
    index: int  # 1-based


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


# -- tokenizer and parser ------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(src):
    tokens = []
    i = 0
    while i < len(src):
        if src[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(src, i)
        if m is None or m.end() == i:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", i)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        i = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, n, constants):
        self.src = src
        self.n = n
        self.constants = constants
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self):
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0)
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = BinOp(pos, op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = BinOp(pos, op, node, self.unary())
        return node

    def unary(self):
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(pos, self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            return BinOp(pos, "^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(pos, float(text))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(pos, text, arg)
            if text == "t":
                return TimeVar(pos)
            m = re.fullmatch(r"u(\d+)", text)
            if m:
                j = int(m.group(1))
                if j < 1 or j > self.n:
                    raise IndexOutOfRange(f"state index u{j} outside 1..{self.n}", pos)
                return StateVar(pos, j)
            if text in self.constants:
                return Num(pos, float(self.constants[text]))
            raise UnknownIdentifier(f"unknown identifier {text!r}", pos)
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected {text!r}", pos)


def parse(src: str, n: int, constants: Mapping[str, float] | None = None) -> Expr:
    """Parse ``src`` into an immutable tree over ``t, u1..un``.

    Parameters
    ----------
    src : str
        Expression text.
    n : int
        State dimension; ``u<j>`` with ``j > n`` is rejected.  Use ``n = 0``
        for expressions that may only depend on ``t``.
    constants : mapping, optional
        Named scalar constants, substituted by value.

    Raises
    ------
    ExprSyntaxError, UnknownIdentifier, IndexOutOfRange
    """
    if not isinstance(src, str):
        raise ExprSyntaxError("expression must be a string", 0)
    return _Parser(src, n, dict(constants or {})).parse()


def state_indices(e: Expr) -> set[int]:
    """Set of state indices referenced in ``e``."""
    if isinstance(e, StateVar):
        return {e.index}
    if isinstance(e, Neg):
        return state_indices(e.arg)
    if isinstance(e, Call):
        return state_indices(e.arg)
    if isinstance(e, BinOp):
        return state_indices(e.left) | state_indices(e.right)
    return set()


def unparse(e: Expr) -> str:
    """Render ``e`` as text that parses back to an equal-valued tree."""
    if isinstance(e, Num):
        if e.value < 0 or (e.value == 0 and np.signbit(e.value)):
            return f"(-{repr(-e.value)})"
        return repr(e.value)
    if isinstance(e, TimeVar):
        return "t"
    if isinstance(e, StateVar):
        return f"u{e.index}"
    if isinstance(e, Neg):
        return f"(-{unparse(e.arg)})"
    if isinstance(e, Call):
        return f"{e.func}({unparse(e.arg)})"
    return f"({unparse(e.left)} {e.op} {unparse(e.right)})"


# -- evaluation ----------------------------------------------------------------------


def _is_integer(x):
    return bool(np.all(np.isfinite(x)) and np.all(x == np.round(x)))


def _power(a, b, pos):
    if _is_integer(b):
        if np.any((a == 0) & (b < 0)):
            raise EvalDomainError("zero raised to a negative power", pos)
        return np.power(a, b)
    if np.any(a <= 0):
        raise EvalDomainError("non-integer power of a non-positive base", pos)
    return np.power(a, b)


def _apply(func, x, pos):
    if func == "log":
        if np.any(x <= 0):
            raise EvalDomainError("log of a non-positive number", pos)
        return np.log(x)
    if func == "sqrt":
        if np.any(x < 0):
            raise EvalDomainError("sqrt of a negative number", pos)
        return np.sqrt(x)
    return getattr(np, func)(x)


def _eval(e, t, u):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, TimeVar):
        return t
    if isinstance(e, StateVar):
        return u[..., e.index - 1]
    if isinstance(e, Neg):
        return -_eval(e.arg, t, u)
    if isinstance(e, Call):
        out = _apply(e.func, _eval(e.arg, t, u), e.pos)
    else:
        a = _eval(e.left, t, u)
        b = _eval(e.right, t, u)
        if e.op == "+":
            out = a + b
        elif e.op == "-":
            out = a - b
        elif e.op == "*":
            out = a * b
        elif e.op == "/":
            if np.any(np.asarray(b) == 0):
                raise EvalDomainError("division by zero", e.pos)
            out = a / b
        else:
            out = _power(np.asarray(a, dtype=float), np.asarray(b, dtype=float), e.pos)
    if np.any(np.isnan(out)):
        raise EvalDomainError("evaluation produced NaN", e.pos)
    return out


def evaluate(e: Expr, t, u=None):
    """Evaluate ``e`` at time(s) ``t`` and state(s) ``u``.

    Parameters
    ----------
    e : Expr
    t : float or ndarray
    u : ndarray, optional
        Last axis indexes the state components.

    Returns
    -------
    float or ndarray
        Broadcast of ``t`` against ``u[..., 0]``.

    Raises
    ------
    EvalDomainError
    """
    t = np.asarray(t, dtype=float)
    u = np.zeros((0,)) if u is None else np.asarray(u, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(e, t, u)
    shape = np.broadcast_shapes(t.shape, u.shape[:-1]) if u.ndim else t.shape
    out = np.broadcast_to(np.asarray(out, dtype=float), shape)
    return float(out) if out.ndim == 0 else np.array(out)


# -- forward-mode derivatives ----------------------------------------------------------


class _Dual:
    """Value plus gradient with respect to ``u``; ``grad`` has shape (n,) + shape."""

    __slots__ = ("val", "grad")

    def __init__(self, val, grad):
        self.val = val
        self.grad = grad


def _diff(e, t, u, n, shape):
    if isinstance(e, Num):
        return _Dual(np.full(shape, e.value), np.zeros((n,) + shape))
    if isinstance(e, TimeVar):
        return _Dual(np.broadcast_to(t, shape).astype(float), np.zeros((n,) + shape))
    if isinstance(e, StateVar):
        g = np.zeros((n,) + shape)
        g[e.index - 1] = 1.0
        return _Dual(np.broadcast_to(u[..., e.index - 1], shape).astype(float), g)
    if isinstance(e, Neg):
        a = _diff(e.arg, t, u, n, shape)
        return _Dual(-a.val, -a.grad)
    if isinstance(e, Call):
        a = _diff(e.arg, t, u, n, shape)
        x = a.val
        f = e.func
        if f == "abs":
            if np.any(x == 0):
                raise NotDifferentiable("abs is not differentiable at 0", e.pos)
            return _Dual(np.abs(x), np.sign(x) * a.grad)
        if f == "sqrt":
            if np.any(x < 0):
                raise EvalDomainError("sqrt of a negative number", e.pos)
            if np.any(x == 0):
                raise NotDifferentiable("sqrt is not differentiable at 0", e.pos)
            r = np.sqrt(x)
            return _Dual(r, a.grad / (2.0 * r))
        if f == "log":
            if np.any(x <= 0):
                raise EvalDomainError("log of a non-positive number", e.pos)
            return _Dual(np.log(x), a.grad / x)
        if f == "sin":
            return _Dual(np.sin(x), np.cos(x) * a.grad)
        if f == "cos":
            return _Dual(np.cos(x), -np.sin(x) * a.grad)
        if f == "tan":
            v = np.tan(x)
            return _Dual(v, (1.0 + v * v) * a.grad)
        if f == "tanh":
            v = np.tanh(x)
            return _Dual(v, (1.0 - v * v) * a.grad)
        v = np.exp(x)
        return _Dual(v, v * a.grad)
    a = _diff(e.left, t, u, n, shape)
    b = _diff(e.right, t, u, n, shape)
    if e.op == "+":
        return _Dual(a.val + b.val, a.grad + b.grad)
    if e.op == "-":
        return _Dual(a.val - b.val, a.grad - b.grad)
    if e.op == "*":
        return _Dual(a.val * b.val, a.grad * b.val + a.val * b.grad)
    if e.op == "/":
        if np.any(b.val == 0):
            raise EvalDomainError("division by zero", e.pos)
        return _Dual(a.val / b.val, (a.grad * b.val - a.val * b.grad) / (b.val * b.val))
    # power
    val = _power(a.val, b.val, e.pos)
    if not np.any(b.grad):
        if _is_integer(b.val):
            low = np.where(b.val == 0, 0.0, np.power(a.val, b.val - 1.0))
            return _Dual(val, b.val * low * a.grad)
        return _Dual(val, b.val * val / a.val * a.grad)
    if np.any(a.val <= 0):
        raise NotDifferentiable("variable exponent needs a positive base", e.pos)
    return _Dual(val, val * (b.grad * np.log(a.val) + b.val * a.grad / a.val))


def differentiate(e: Expr, t, u, n: int | None = None):
    """Value and exact gradient of ``e`` with respect to ``u``.

    Parameters
    ----------
    e : Expr
    t : float or ndarray
    u : ndarray
        Last axis of length ``n``.
    n : int, optional
        Defaults to ``u.shape[-1]``.

    Returns
    -------
    value : float or ndarray
    grad : ndarray, shape ``(n,) + value.shape``

    Raises
    ------
    NotDifferentiable, EvalDomainError
    """
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    n = u.shape[-1] if n is None else n
    shape = np.broadcast_shapes(t.shape, u.shape[:-1])
    with np.errstate(all="ignore"):
        d = _diff(e, t, u, n, shape)
    if np.any(np.isnan(d.val)) or np.any(np.isnan(d.grad)):
        raise EvalDomainError("evaluation produced NaN", e.pos)
    val = np.asarray(d.val, dtype=float)
    return (float(val) if val.ndim == 0 else val), np.asarray(d.grad, dtype=float)
