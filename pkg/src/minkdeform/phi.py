"""Expressions for the deformation function phi(s1, ..., sp).

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 's' INDEX | 's' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sqrt | exp | log

``^`` binds tighter than unary minus and is right associative, so ``-s1^2``
is ``-(s1^2)`` and ``2^3^2`` is ``2^(3^2)``.  The bare name ``s`` is accepted
as ``s1`` when the arity is 1.

The same tree evaluates on floats, numpy arrays and :class:`~minkdeform.jets.Jet`
values.  Float evaluation is either strict (domain violations raise) or
masking (violations become NaN so that batched callers can drop them).
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from . import jets
from .errors import (DivisionByNearZero, DomainError, InvalidParam,
                     PhiSyntaxError, UnknownBuiltin, UnknownFunction,
                     UnknownVariable)
from .jets import Jet

FUNCTIONS = ("sqrt", "exp", "log")


# --- AST -----------------------------------------------------------------

class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError("Const holds finite non-negative values; wrap in Neg")


@dataclass(frozen=True)
class Var(Node):
    index: int  # 1-based


@dataclass(frozen=True)
class Neg(Node):
    operand: Node


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    name: str
    arg: Node


def const(value):
    value = float(value)
    return Neg(Const(-value)) if value < 0 else Const(value)


def Add(a, b):
    return BinOp("+", a, b)


def Sub(a, b):
    return BinOp("-", a, b)


def Mul(a, b):
    return BinOp("*", a, b)


def Div(a, b):
    return BinOp("/", a, b)


def Pow(a, b):
    return BinOp("^", a, b)


def Sqrt(a):
    return Call("sqrt", a)


@dataclass(frozen=True)
class PhiExpr:
    """A parsed phi with its declared arity."""

    ast: Node
    arity: int

    def __post_init__(self):
        if self.arity < 1:
            raise InvalidParam("arity must be at least 1")
        used = max_var_index(self.ast)
        if used > self.arity:
            raise UnknownVariable(f"s{used} used with arity {self.arity}")

    def __call__(self, *args, strict=True):
        return evaluate(self.ast, args, strict=strict)

    def jet(self, s):
        """Jet of phi at ``s`` in ``arity`` variables; ``s`` is (p,) or (p, *batch)."""
        return eval_phi(self, seed_jets(s))

    def __str__(self):
        return serialize(self.ast)


def max_var_index(node):
    return max((n.index for n in _iter_nodes(node) if isinstance(n, Var)), default=0)


# --- parser --------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise PhiSyntaxError(f"unexpected character {text[pos]!r}",
                                 len(text[:pos].encode()))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), len(text[:pos].encode())))
        pos = m.end()
    tokens.append(("end", "", len(text.encode())))
    return tokens


class _Parser:
    def __init__(self, text, arity):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.arity = arity

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, off = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise PhiSyntaxError(f"expected {value!r}, found {found}", off)

    def parse(self):
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise PhiSyntaxError(f"unexpected {text!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            return self.name(text, off)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise PhiSyntaxError(f"unexpected {found}", off)

    def name(self, text, off):
        m = re.fullmatch(r"s(\d*)", text)
        if m:
            if m.group(1) == "":
                if self.arity != 1:
                    raise UnknownVariable(
                        f"bare 's' at offset {off} is ambiguous for arity {self.arity}")
                return Var(1)
            index = int(m.group(1))
            if index < 1 or index > self.arity:
                raise UnknownVariable(
                    f"{text} at offset {off} exceeds arity {self.arity}")
            return Var(index)
        if text in FUNCTIONS:
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(text, arg)
        raise UnknownFunction(f"unknown name {text!r} at offset {off}")


def parse(text, arity=1):
    if not text or not text.strip():
        raise PhiSyntaxError("empty expression", 0)
    return PhiExpr(_Parser(text, arity).parse(), arity)


# --- serializer ----------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY, _POWER, _ATOM = 3, 4, 5


def _prec(node):
    if isinstance(node, BinOp):
        return _POWER if node.op == "^" else _PREC[node.op]
    if isinstance(node, Neg):
        return _UNARY
    return _ATOM


def _wrap(node, need):
    text = serialize(node)
    return f"({text})" if _prec(node) < need else text


def serialize(node):
    """Minimal-parenthesis text that parses back to the identical tree."""
    if isinstance(node, PhiExpr):
        node = node.ast
    if isinstance(node, Const):
        v = node.value
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(node, Var):
        return f"s{node.index}"
    if isinstance(node, Call):
        return f"{node.name}({serialize(node.arg)})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _UNARY)
    if node.op == "^":
        return f"{_wrap(node.left, _ATOM)}^{_wrap(node.right, _UNARY)}"
    p = _PREC[node.op]
    # left-assoc: the right operand needs strictly higher precedence
    return f"{_wrap(node.left, p)}{node.op}{_wrap(node.right, p + 1)}"


# --- evaluation ----------------------------------------------------------

class _FloatOps:
    def __init__(self, strict):
        self.strict = strict

    def _fail(self, exc, bad, value):
        if self.strict:
            raise exc
        return np.where(bad, np.nan, value)

    def div(self, a, b):
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        bad = np.abs(b) < jets.NEAR_ZERO
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a / np.where(bad, 1.0, b)
        if np.any(bad):
            return self._fail(DivisionByNearZero("phi denominator below 1e-14"), bad, out)
        return out

    def sqrt(self, a):
        a = np.asarray(a, dtype=float)
        bad = a < 0
        out = np.sqrt(np.where(bad, 0.0, a))
        if np.any(bad):
            return self._fail(DomainError("sqrt of a negative value"), bad, out)
        return out

    def log(self, a):
        a = np.asarray(a, dtype=float)
        bad = a <= 0
        out = np.log(np.where(bad, 1.0, a))
        if np.any(bad):
            return self._fail(DomainError("log of a non-positive value"), bad, out)
        return out

    def exp(self, a):
        return np.exp(a)

    def pow(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if b.ndim == 0 and float(b).is_integer():
            k = int(b)
            if k >= 0:
                return a**k
            return self.div(1.0, a ** (-k))
        bad = a < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(bad, 0.0, a) ** b
        if np.any(bad):
            return self._fail(DomainError("non-integer power of a negative base"),
                              bad, out)
        return out


class _JetOps:
    """Jet arithmetic, falling back to strict floats for constant subtrees."""

    _floats = _FloatOps(strict=True)

    def div(self, a, b):
        if isinstance(b, Jet):
            return a / b
        return a / b if isinstance(a, Jet) else self._floats.div(a, b)

    def sqrt(self, a):
        return jets.sqrt(a) if isinstance(a, Jet) else self._floats.sqrt(a)

    def log(self, a):
        return jets.log(a) if isinstance(a, Jet) else self._floats.log(a)

    def exp(self, a):
        return jets.exp(a) if isinstance(a, Jet) else np.exp(a)

    def pow(self, a, b):
        if isinstance(b, Jet):
            if not isinstance(a, Jet):
                a = Jet.constant(np.broadcast_to(a, b.batch_shape), b.nvars)
            return jets.exp(b * jets.log(a))
        if not isinstance(a, Jet):
            return self._floats.pow(a, b)
        b = np.asarray(b, dtype=float)
        if b.ndim != 0:
            raise DomainError("batched exponent needs jet arguments")
        return jets.power(a, float(b))


def evaluate(node, args, strict=True):
    """Evaluate an AST on floats/arrays or on jets (any mix)."""
    if isinstance(node, PhiExpr):
        node = node.ast
    use_jets = any(isinstance(a, Jet) for a in args)
    ops = _JetOps() if use_jets else _FloatOps(strict)
    memo = {}

    def ev(n):
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Const):
            out = n.value
        elif isinstance(n, Var):
            out = args[n.index - 1]
        elif isinstance(n, Neg):
            out = -ev(n.operand)
        elif isinstance(n, Call):
            out = getattr(ops, n.name)(ev(n.arg))
        else:
            a, b = ev(n.left), ev(n.right)
            if n.op == "+":
                out = a + b
            elif n.op == "-":
                out = a - b
            elif n.op == "*":
                out = a * b
            elif n.op == "/":
                out = ops.div(a, b)
            else:
                out = ops.pow(a, b)
        memo[key] = out
        return out

    out = ev(node)
    if use_jets and not isinstance(out, Jet):
        ref = next(a for a in args if isinstance(a, Jet))
        out = Jet.constant(np.broadcast_to(out, ref.batch_shape), ref.nvars)
    return out


def seed_jets(s):
    """One jet per argument, ``s_i + e_i``, in ``len(s)`` variables."""
    s = np.asarray(s, dtype=float)
    p = s.shape[0]
    return [Jet.variable(s[i], i, p) for i in range(p)]


def eval_phi(e, args):
    if len(args) != e.arity:
        raise InvalidParam(f"phi of arity {e.arity} got {len(args)} arguments")
    if any(isinstance(a, Jet) for a in args):
        nv = {a.nvars for a in args if isinstance(a, Jet)}
        if len(nv) != 1:
            raise ValueError("phi arguments must share the jet variable count")
    return evaluate(e.ast, args)


def derivatives(e, s):
    """phi, gradient, Hessian and third derivatives at ``s`` of shape (p,) or (p, *batch).

    Returned arrays put batch axes first and derivative axes last.
    """
    return jets.derivative_tensors(e.jet(s))


# --- built-in catalog ----------------------------------------------------

S1, S2 = Var(1), Var(2)
ONE = Const(1.0)


def _check_unit_interval(d, closed_right=False):
    d = float(d)
    ok = 0.0 < d <= 1.0 if closed_right else 0.0 < d < 1.0
    if not ok:
        raise InvalidParam(f"parameter d={d} outside (0, 1{']' if closed_right else ')'}")
    return d


def _randers(params):
    return PhiExpr(Add(ONE, S1), 1)


def _kropina(params):
    l = float(params[0]) if params else 1.0
    if l <= 0:
        raise InvalidParam("Kropina exponent must be positive")
    denom = S1 if l == 1.0 else Pow(S1, const(l))
    return PhiExpr(Div(ONE, denom), 1)


def _slope(params):
    return PhiExpr(Div(ONE, Sub(ONE, S1)), 1)


def _quadratic(params):
    return PhiExpr(Pow(Add(ONE, S1), Const(2.0)), 1)


def _circle(params):
    return PhiExpr(Sqrt(Sub(ONE, Pow(S1, Const(2.0)))), 1)


def _shifted_sphere(params):
    if len(params) != 1:
        raise InvalidParam("shifted_sphere takes one parameter d")
    d = float(params[0])
    if not abs(d) < 1.0:
        raise InvalidParam(f"shifted_sphere needs |d| < 1, got {d}")
    inner = Add(Pow(S1, Const(2.0)), const(1.0 - d * d))
    return PhiExpr(Div(ONE, Add(S1, Sqrt(inner))), 1)


def _ellipsoid_step(params):
    if len(params) != 1:
        raise InvalidParam("ellipsoid_step takes one parameter d")
    d = _check_unit_interval(params[0], closed_right=True)
    # pairs with the unscaled form dy_i: 1 - (1 - d^2) s^2
    return PhiExpr(Sqrt(Sub(ONE, Mul(const(1.0 - d * d), Pow(S1, Const(2.0))))), 1)


def _multi_ellipsoid(params):
    if not params:
        raise InvalidParam("multi_ellipsoid needs at least one d")
    for d in params:
        _check_unit_interval(d, closed_right=True)
    node = ONE
    for i in range(len(params)):
        node = Sub(node, Pow(Var(i + 1), Const(2.0)))
    return PhiExpr(Sqrt(node), len(params))


def _shifted_kropina(params):
    # F + F^2/beta1 + beta2
    return PhiExpr(Add(Add(ONE, Div(ONE, S1)), S2), 2)


def _shifted_slope(params):
    return PhiExpr(Add(Div(ONE, Sub(ONE, S1)), S2), 2)


def _shifted_quadratic(params):
    return PhiExpr(Add(Pow(Add(ONE, S1), Const(2.0)), S2), 2)


def _constant(params):
    c = float(params[0]) if params else 1.0
    if c <= 0:
        raise InvalidParam("constant phi must be positive")
    return PhiExpr(Const(c), int(params[1]) if len(params) > 1 else 1)


BUILTINS = {
    "randers": _randers,
    "kropina": _kropina,
    "slope": _slope,
    "quadratic": _quadratic,
    "circle": _circle,
    "shifted_sphere": _shifted_sphere,
    "ellipsoid_step": _ellipsoid_step,
    "multi_ellipsoid": _multi_ellipsoid,
    "shifted_kropina": _shifted_kropina,
    "shifted_slope": _shifted_slope,
    "shifted_quadratic": _shifted_quadratic,
    "constant": _constant,
}


def builtin(name, params=()):
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownBuiltin(f"no built-in phi named {name!r}") from None
    return factory(list(params))


def from_text(text, arity=None):
    """Resolve ``name`` / ``name:p1,p2`` to a builtin, anything else is parsed."""
    head, _, tail = text.strip().partition(":")
    if head in BUILTINS:
        params = [float(x) for x in tail.split(",") if x.strip()] if tail else []
        e = builtin(head, params)
        if arity is not None and e.arity != arity:
            raise InvalidParam(f"builtin {head} has arity {e.arity}, expected {arity}")
        return e
    return parse(text, 1 if arity is None else arity)


def substitute(node, replacements):
    """Replace every ``Var(i)`` by ``replacements[i-1]``; shared subtrees stay shared."""
    memo = {}

    def sub(n):
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Var):
            out = replacements[n.index - 1]
        elif isinstance(n, Const):
            out = n
        elif isinstance(n, Neg):
            out = Neg(sub(n.operand))
        elif isinstance(n, Call):
            out = Call(n.name, sub(n.arg))
        else:
            out = BinOp(n.op, sub(n.left), sub(n.right))
        memo[key] = out
        return out

    return sub(node)


def _iter_nodes(node):
    """Each distinct node object once (DAG-safe)."""
    seen = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        yield n
        if isinstance(n, Neg):
            stack.append(n.operand)
        elif isinstance(n, Call):
            stack.append(n.arg)
        elif isinstance(n, BinOp):
            stack.extend((n.left, n.right))
