"""Small expression language for real functions of n variables.

Expressions are parsed into an immutable AST and evaluated on batches of
points.  Gradients are computed in forward mode: every node produces a value
array of shape ``(N,)`` together with a partials array of shape ``(N, n)``.

Grammar::

    number      [0-9]+(.[0-9]+)?([eE][+-]?[0-9]+)?
    identifier  pi, e, x1..xn, x/y/z (n <= 3), function names
    operators   + - * / ^ ( ) ,

Precedence from low to high: ``+ -``, ``* /``, unary minus, ``^`` (right
associative), call.  There is no implicit multiplication.

At kinks the subderivative convention is ``sign(0) = 0`` for ``abs``,
``norm()`` and ``hypot``; ``min``/``max`` let the left argument win ties.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError",
    "VariableIndexError", "DomainError",
    "Num", "Var", "Unary", "Binary", "Call", "Norm", "Expr",
    "parse", "unparse", "evaluate", "gradient", "evaluate_many",
    "value_and_grad",
]


class ExprError(ValueError):
    """Base class for parse errors; ``position`` is a 0-based offset."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifierError(ExprError):
    pass


class VariableIndexError(ExprError):
    pass


class DomainError(ArithmeticError):
    """Raised when an operation is evaluated outside its domain."""


UNARY_FUNCS = ("abs", "sqrt", "exp", "log", "sin", "cos", "tanh")
VARIADIC_FUNCS = ("min", "max", "hypot")
CONSTANTS = {"pi": math.pi, "e": math.e}
ALIASES = {"x": 1, "y": 2, "z": 3}


# AST ----------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float
    name: str | None = None


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of UNARY_FUNCS
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str  # min, max, hypot
    args: tuple


@dataclass(frozen=True)
class Norm:
    pass


@dataclass(frozen=True)
class Expr:
    """A parsed expression over R^n."""

    root: object
    n: int
    source: str = field(default="", compare=False)

    def __call__(self, point):
        return evaluate(self, point)

    def grad(self, point):
        return gradient(self, point)

    def __str__(self):
        return unparse(self)


# Tokenizer ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


# Parser (precedence climbing) ----------------------------------------------

_BINARY_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_MINUS_BP = 30


class _Parser:
    def __init__(self, source, n):
        self.source = source
        self.n = n
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.tok
        if t.text != text:
            found = repr(t.text) if t.kind != "end" else "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found}", t.pos)
        return self.advance()

    def lbp(self, t):
        if t.kind == "op":
            return _BINARY_LBP.get(t.text, 0)
        return 0

    def parse(self):
        node = self.expression(0)
        t = self.tok
        if t.kind != "end":
            raise ExprSyntaxError(f"unexpected token {t.text!r}", t.pos)
        return node

    def expression(self, rbp):
        left = self.nud(self.advance())
        while True:
            t = self.tok
            if t.kind in ("num", "ident") or t.text == "(":
                raise ExprSyntaxError(
                    f"unexpected {t.text!r} (implicit multiplication is not allowed)",
                    t.pos)
            if rbp >= self.lbp(t):
                return left
            self.advance()
            if t.text == "^":
                right = self.expression(_BINARY_LBP["^"] - 1)
            else:
                right = self.expression(_BINARY_LBP[t.text])
            left = Binary(t.text, left, right)

    def nud(self, t):
        if t.kind == "num":
            return Num(float(t.text))
        if t.kind == "ident":
            return self.identifier(t)
        if t.text == "-":
            return Unary("neg", self.expression(_UNARY_MINUS_BP))
        if t.text == "(":
            node = self.expression(0)
            self.expect(")")
            return node
        if t.kind == "end":
            raise ExprSyntaxError("unexpected end of input", t.pos)
        raise ExprSyntaxError(f"unexpected token {t.text!r}", t.pos)

    def identifier(self, t):
        name = t.text
        if self.tok.text == "(":
            return self.call(t)
        if name in CONSTANTS:
            return Num(CONSTANTS[name], name)
        m = re.fullmatch(r"x([0-9]+)", name)
        if m:
            return self.variable(int(m.group(1)), t)
        if name in ALIASES and self.n <= 3:
            return self.variable(ALIASES[name], t)
        if name in UNARY_FUNCS or name in VARIADIC_FUNCS or name == "norm":
            raise ExprSyntaxError(f"function {name!r} must be called", t.pos)
        raise UnknownIdentifierError(f"unknown identifier {name!r}", t.pos)

    def variable(self, index, t):
        if index < 1 or index > self.n:
            raise VariableIndexError(
                f"variable {t.text!r} out of range for dimension n={self.n}", t.pos)
        return Var(index)

    def call(self, t):
        name = t.text
        if name not in UNARY_FUNCS and name not in VARIADIC_FUNCS and name != "norm":
            raise UnknownIdentifierError(f"unknown function {name!r}", t.pos)
        self.expect("(")
        args = []
        if self.tok.text != ")":
            args.append(self.expression(0))
            while self.tok.text == ",":
                self.advance()
                args.append(self.expression(0))
        self.expect(")")
        if name == "norm":
            if args:
                raise ExprSyntaxError("norm() takes no arguments", t.pos)
            return Norm()
        if name in UNARY_FUNCS:
            if len(args) != 1:
                raise ExprSyntaxError(f"{name}() takes exactly one argument", t.pos)
            return Unary(name, args[0])
        min_args = 1 if name == "hypot" else 2
        if len(args) < min_args:
            raise ExprSyntaxError(f"{name}() needs at least {min_args} arguments", t.pos)
        return Call(name, tuple(args))


def parse(source, n):
    """Parse ``source`` into an :class:`Expr` over R^n."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return Expr(_Parser(source, n).parse(), n, source)


def unparse(expr):
    """Fully parenthesized source text; ``parse(unparse(e), e.n) == e``."""
    return _unparse(expr.root if isinstance(expr, Expr) else expr)


def _unparse(node):
    if isinstance(node, Num):
        if node.name is not None:
            return node.name
        if node.value < 0:
            return f"(-{-node.value!r})"
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Norm):
        return "norm()"
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{_unparse(node.arg)})"
        return f"{node.op}({_unparse(node.arg)})"
    if isinstance(node, Binary):
        return f"({_unparse(node.left)}{node.op}{_unparse(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({','.join(_unparse(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


# Evaluation ----------------------------------------------------------------

def _is_constant(node):
    if isinstance(node, Num):
        return True
    if isinstance(node, (Var, Norm)):
        return False
    if isinstance(node, Unary):
        return _is_constant(node.arg)
    if isinstance(node, Binary):
        return _is_constant(node.left) and _is_constant(node.right)
    if isinstance(node, Call):
        return all(_is_constant(a) for a in node.args)
    return False


def _fail(op, mask, X):
    k = int(np.flatnonzero(mask)[0])
    raise DomainError(f"{op} undefined at point {X[k].tolist()}")


class _Evaluator:
    def __init__(self, X, need_grad):
        self.X = X
        self.N, self.n = X.shape
        self.need_grad = need_grad

    def zeros_d(self):
        return np.zeros((self.N, self.n)) if self.need_grad else None

    def scale_d(self, factor, d):
        if d is None:
            return None
        return factor[:, None] * d

    def run(self, node):
        X = self.X
        if isinstance(node, Num):
            return np.full(self.N, node.value), self.zeros_d()
        if isinstance(node, Var):
            v = X[:, node.index - 1].copy()
            d = None
            if self.need_grad:
                d = np.zeros((self.N, self.n))
                d[:, node.index - 1] = 1.0
            return v, d
        if isinstance(node, Norm):
            r = np.sqrt(np.sum(X * X, axis=1))
            d = None
            if self.need_grad:
                safe = np.where(r > 0, r, 1.0)
                d = np.where((r > 0)[:, None], X / safe[:, None], 0.0)
            return r, d
        if isinstance(node, Unary):
            return self.unary(node)
        if isinstance(node, Binary):
            return self.binary(node)
        if isinstance(node, Call):
            return self.call(node)
        raise TypeError(f"not an expression node: {node!r}")

    def unary(self, node):
        u, du = self.run(node.arg)
        op = node.op
        X = self.X
        if op == "neg":
            return -u, None if du is None else -du
        if op == "abs":
            return np.abs(u), self.scale_d(np.sign(u), du)
        if op == "sqrt":
            if np.any(u < 0):
                _fail("sqrt", u < 0, X)
            v = np.sqrt(u)
            if du is None:
                return v, None
            at_zero = v == 0
            if np.any(at_zero & np.any(du != 0, axis=1)):
                _fail("derivative of sqrt", at_zero & np.any(du != 0, axis=1), X)
            factor = np.where(at_zero, 0.0, 0.5 / np.where(at_zero, 1.0, v))
            return v, self.scale_d(factor, du)
        if op == "exp":
            v = np.exp(u)
            return v, self.scale_d(v, du)
        if op == "log":
            if np.any(u <= 0):
                _fail("log", u <= 0, X)
            return np.log(u), self.scale_d(1.0 / u, du)
        if op == "sin":
            return np.sin(u), self.scale_d(np.cos(u), du)
        if op == "cos":
            return np.cos(u), self.scale_d(-np.sin(u), du)
        if op == "tanh":
            v = np.tanh(u)
            return v, self.scale_d(1.0 - v * v, du)
        raise TypeError(f"unknown unary op {op!r}")

    def binary(self, node):
        op = node.op
        if op == "^":
            return self.power(node)
        u, du = self.run(node.left)
        w, dw = self.run(node.right)
        if op == "+":
            return u + w, None if du is None else du + dw
        if op == "-":
            return u - w, None if du is None else du - dw
        if op == "*":
            d = None if du is None else w[:, None] * du + u[:, None] * dw
            return u * w, d
        if op == "/":
            if np.any(w == 0):
                _fail("division", w == 0, self.X)
            v = u / w
            d = None if du is None else (du - v[:, None] * dw) / w[:, None]
            return v, d
        raise TypeError(f"unknown binary op {op!r}")

    def power(self, node):
        X = self.X
        u, du = self.run(node.left)
        if _is_constant(node.right):
            c = float(self.run(node.right)[0][0]) if self.N else 0.0
            if c == round(c) and abs(c) < 2**31:
                k = int(c)
                if k == 0:
                    return np.ones(self.N), self.zeros_d()
                if k < 0 and np.any(u == 0):
                    _fail("negative integer power", u == 0, X)
                v = u**k
                return v, self.scale_d(k * u ** (k - 1), du)
            # non-integer constant exponent: base must be positive;
            # a zero base is accepted for c > 0 (value 0)
            bad = (u < 0) | ((u == 0) & (c <= 0))
            if np.any(bad):
                _fail("non-integer power", bad, X)
            with np.errstate(divide="ignore", invalid="ignore"):
                v = np.power(u, c)
                if du is None:
                    return v, None
                at_zero = u == 0
                if c < 1 and np.any(at_zero & np.any(du != 0, axis=1)):
                    _fail("derivative of power", at_zero & np.any(du != 0, axis=1), X)
                factor = np.where(at_zero, 0.0, c * np.power(np.where(at_zero, 1.0, u), c - 1))
            return v, self.scale_d(factor, du)
        w, dw = self.run(node.right)
        if np.any(u <= 0):
            _fail("power with variable exponent", u <= 0, X)
        logu = np.log(u)
        v = np.exp(w * logu)
        d = None if du is None else v[:, None] * (dw * logu[:, None] + (w / u)[:, None] * du)
        return v, d

    def call(self, node):
        results = [self.run(a) for a in node.args]
        if node.name in ("min", "max"):
            v, d = results[0]
            v = v.copy()
            d = None if d is None else d.copy()
            for w, dw in results[1:]:
                take = w < v if node.name == "min" else w > v
                v = np.where(take, w, v)
                if d is not None:
                    d = np.where(take[:, None], dw, d)
            return v, d
        if node.name == "hypot":
            vals = np.stack([r[0] for r in results])
            h = np.sqrt(np.sum(vals * vals, axis=0))
            if not self.need_grad:
                return h, None
            num = sum(r[0][:, None] * r[1] for r in results)
            safe = np.where(h > 0, h, 1.0)
            d = np.where((h > 0)[:, None], num / safe[:, None], 0.0)
            return h, d
        raise TypeError(f"unknown function {node.name!r}")


def _as_points(expr, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, expr.n) if expr.n == 1 and X.size != 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != expr.n:
        raise ValueError(f"points must have {expr.n} coordinates, got shape {np.shape(X)}")
    return X


def evaluate_many(expr, X):
    """Values at the rows of ``X`` (shape ``(N, n)``)."""
    X = _as_points(expr, X)
    with np.errstate(all="ignore"):
        return _Evaluator(X, False).run(expr.root)[0]


def value_and_grad(expr, X):
    """Values ``(N,)`` and gradients ``(N, n)`` at the rows of ``X``."""
    X = _as_points(expr, X)
    with np.errstate(all="ignore"):
        return _Evaluator(X, True).run(expr.root)


def _single(expr, point):
    p = np.asarray(point, dtype=float).reshape(-1)
    if p.size != expr.n:
        raise ValueError(f"point has {p.size} coordinates, expression has n={expr.n}")
    return p.reshape(1, -1)


def evaluate(expr, point):
    return float(evaluate_many(expr, _single(expr, point))[0])


def gradient(expr, point):
    return value_and_grad(expr, _single(expr, point))[1][0]
