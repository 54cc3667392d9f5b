"""Tiny scalar expression language: Pratt parser, evaluator, exact gradients.

Systems and certificates enter the toolkit as text, e.g. ``"4*r^2 + r^5*sin(th)"``.
This module turns such text into immutable syntax trees that can be evaluated,
differentiated exactly via forward-mode dual numbers, pretty-printed, and
compiled to fast plain-Python callables for use inside ODE right-hand sides.

Grammar surface (frozen for config-file compatibility): ``+ - * / ^`` with the
usual precedence, ``^`` right-associative and binding tighter than unary minus
(so ``-x^2`` is ``-(x^2)``), parenthesised calls of sin, cos, tan, exp, log,
sqrt, abs, pow, float literals, and identifiers made of ASCII letters, digits
and underscores starting with a letter.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ExprError",
    "ParseError",
    "EvalDomainError",
    "NonDifferentiableError",
    "ExprAst",
    "DualValue",
    "parse",
    "evaluate",
    "grad",
    "to_string",
    "compile_fn",
    "FUNCTIONS",
]


class ExprError(ValueError):
    """Base class for everything this module raises on purpose."""


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class EvalDomainError(ExprError):
    """Arithmetic left the real domain (log of non-positive, sqrt of negative,
    division by zero, fractional power of a negative base, overflow)."""

    def __init__(self, message: str, node=None):
        super().__init__(message)
        self.node = node


class NonDifferentiableError(EvalDomainError):
    """Gradient requested at a kink (currently only abs at 0)."""


# function name -> arity
FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "abs": 1,
    "pow": 2,
}


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class ExprAst:
    """Parsed expression plus its declared variable ordering.

    Trees are immutable after construction; evaluation and differentiation are
    pure functions, so a single ExprAst may be shared across threads freely.
    """

    root: object
    variables: tuple[str, ...]
    source: str

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def __str__(self) -> str:
        return to_string(self)


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


@dataclass
class _Token:
    kind: str  # "num" | "ident" | "op" | "end"
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


# ---------------------------------------------------------------------------
# Pratt parser

_LBP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_RBP = 25  # between mul and pow: -x^2 == -(x^2), -2*x == (-2)*x


class _Parser:
    def __init__(self, source: str, variables: Sequence[str]):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        self.var_index = {name: k for k, name in enumerate(variables)}

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tok
        self.i += 1
        return t

    def expect_op(self, text: str):
        if self.tok.kind != "op" or self.tok.text != text:
            raise ParseError(f"expected {text!r}", self.tok.pos)
        return self.advance()

    def parse_expression(self, rbp: int = 0):
        left = self.parse_prefix()
        while self.tok.kind == "op" and _LBP.get(self.tok.text, -1) > rbp:
            op = self.advance().text
            if op == "^":
                # right-associative
                right = self.parse_expression(_LBP["^"] - 1)
            else:
                right = self.parse_expression(_LBP[op])
            left = BinOp(op, left, right)
        return left

    def parse_prefix(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "ident":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.parse_call(t)
            if t.text in FUNCTIONS:
                raise ParseError(f"function {t.text!r} requires arguments", t.pos)
            if t.text not in self.var_index:
                raise ParseError(f"unknown identifier {t.text!r}", t.pos)
            return Var(self.var_index[t.text], t.text)
        if t.kind == "op":
            if t.text == "-":
                self.advance()
                return Neg(self.parse_expression(_UNARY_RBP))
            if t.text == "+":
                self.advance()
                return self.parse_expression(_UNARY_RBP)
            if t.text == "(":
                self.advance()
                inner = self.parse_expression(0)
                self.expect_op(")")
                return inner
        raise ParseError("syntax error", t.pos)

    def parse_call(self, name_tok: _Token):
        if name_tok.text not in FUNCTIONS:
            raise ParseError(f"unknown function {name_tok.text!r}", name_tok.pos)
        arity = FUNCTIONS[name_tok.text]
        self.expect_op("(")
        args = [self.parse_expression(0)]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.parse_expression(0))
        self.expect_op(")")
        if len(args) != arity:
            raise ParseError(
                f"function {name_tok.text!r} takes {arity} argument(s), got {len(args)}",
                name_tok.pos,
            )
        return Call(name_tok.text, tuple(args))


def parse(source: str, variables: Sequence[str]) -> ExprAst:
    """Parse ``source`` against an ordered variable list.

    Raises ParseError (with character position) for malformed input, unknown
    identifiers or functions, and arity mismatches.
    """
    if not source or not source.strip():
        raise ParseError("empty expression", 0)
    names = list(variables)
    if len(set(names)) != len(names):
        raise ParseError("duplicate variable names", 0)
    for name in names:
        if not _IDENT_RE.match(name):
            raise ParseError(f"invalid variable name {name!r}", 0)
        if name in FUNCTIONS:
            raise ParseError(f"variable name {name!r} shadows a function", 0)
    p = _Parser(source, names)
    root = p.parse_expression(0)
    if p.tok.kind != "end":
        raise ParseError("unexpected trailing input", p.tok.pos)
    return ExprAst(root, tuple(names), source)


# ---------------------------------------------------------------------------
# Float evaluation


def _pow_float(base: float, expo: float, node) -> float:
    if base < 0.0 and expo != math.floor(expo):
        raise EvalDomainError(
            f"fractional power of negative base ({base!r} ^ {expo!r})", node
        )
    if base == 0.0 and expo < 0.0:
        raise EvalDomainError("zero raised to a negative power", node)
    try:
        return math.pow(base, expo)
    except (ValueError, OverflowError) as exc:
        raise EvalDomainError(f"power failed: {exc}", node) from exc


def _eval_float(node, x) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index])
    if isinstance(node, Neg):
        return -_eval_float(node.arg, x)
    if isinstance(node, BinOp):
        a = _eval_float(node.left, x)
        b = _eval_float(node.right, x)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise EvalDomainError("division by zero", node)
            return a / b
        return _pow_float(a, b, node)
    # Call
    a = _eval_float(node.args[0], x)
    f = node.func
    if f == "sin":
        return math.sin(a)
    if f == "cos":
        return math.cos(a)
    if f == "tan":
        return math.tan(a)
    if f == "exp":
        try:
            return math.exp(a)
        except OverflowError as exc:
            raise EvalDomainError("exp overflow", node) from exc
    if f == "log":
        if a <= 0.0:
            raise EvalDomainError(f"log of non-positive value {a!r}", node)
        return math.log(a)
    if f == "sqrt":
        if a < 0.0:
            raise EvalDomainError(f"sqrt of negative value {a!r}", node)
        return math.sqrt(a)
    if f == "abs":
        return abs(a)
    # pow
    b = _eval_float(node.args[1], x)
    return _pow_float(a, b, node)


def evaluate(ast: ExprAst, bindings: Sequence[float]) -> float:
    """Evaluate the tree at a binding vector (one value per declared variable)."""
    if len(bindings) != ast.n_vars:
        raise ExprError(
            f"expected {ast.n_vars} bindings, got {len(bindings)}"
        )
    return _eval_float(ast.root, bindings)


# ---------------------------------------------------------------------------
# Dual numbers (forward mode, all partials in one pass)


class DualValue:
    """A first-order jet: value plus one partial per declared variable.

    Constants carry all-zero partials; variable i carries the i-th unit vector.
    """

    __slots__ = ("value", "partials")

    def __init__(self, value: float, partials: np.ndarray):
        self.value = float(value)
        self.partials = partials

    @staticmethod
    def constant(value: float, n: int) -> "DualValue":
        return DualValue(value, np.zeros(n))

    @staticmethod
    def variable(value: float, index: int, n: int) -> "DualValue":
        p = np.zeros(n)
        p[index] = 1.0
        return DualValue(value, p)

    def __add__(self, other):
        return DualValue(self.value + other.value, self.partials + other.partials)

    def __sub__(self, other):
        return DualValue(self.value - other.value, self.partials - other.partials)

    def __neg__(self):
        return DualValue(-self.value, -self.partials)

    def __mul__(self, other):
        return DualValue(
            self.value * other.value,
            self.value * other.partials + other.value * self.partials,
        )

    def __repr__(self):
        return f"DualValue({self.value!r}, {self.partials!r})"


def _dual_div(a: DualValue, b: DualValue, node) -> DualValue:
    if b.value == 0.0:
        raise EvalDomainError("division by zero", node)
    inv = 1.0 / b.value
    return DualValue(
        a.value * inv, (a.partials - (a.value * inv) * b.partials) * inv
    )


def _dual_pow(a: DualValue, b: DualValue, node) -> DualValue:
    exponent_is_constant = not b.partials.any()
    if exponent_is_constant and b.value == math.floor(b.value):
        n = b.value
        v = _pow_float(a.value, n, node)
        if n == 0.0:
            return DualValue(v, np.zeros_like(a.partials))
        if a.value == 0.0 and n < 1.0:
            raise EvalDomainError("power not differentiable at zero base", node)
        dv = n * _pow_float(a.value, n - 1.0, node)
        return DualValue(v, dv * a.partials)
    if a.value <= 0.0:
        raise EvalDomainError(
            "general power requires positive base for differentiation", node
        )
    v = math.pow(a.value, b.value)
    dv = v * (b.partials * math.log(a.value) + b.value * a.partials / a.value)
    return DualValue(v, dv)


def _eval_dual(node, duals) -> DualValue:
    if isinstance(node, Num):
        return DualValue.constant(node.value, duals[0].partials.shape[0] if duals else 0)
    if isinstance(node, Var):
        return duals[node.index]
    if isinstance(node, Neg):
        return -_eval_dual(node.arg, duals)
    if isinstance(node, BinOp):
        a = _eval_dual(node.left, duals)
        b = _eval_dual(node.right, duals)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return _dual_div(a, b, node)
        return _dual_pow(a, b, node)
    a = _eval_dual(node.args[0], duals)
    f = node.func
    if f == "sin":
        return DualValue(math.sin(a.value), math.cos(a.value) * a.partials)
    if f == "cos":
        return DualValue(math.cos(a.value), -math.sin(a.value) * a.partials)
    if f == "tan":
        t = math.tan(a.value)
        return DualValue(t, (1.0 + t * t) * a.partials)
    if f == "exp":
        try:
            v = math.exp(a.value)
        except OverflowError as exc:
            raise EvalDomainError("exp overflow", node) from exc
        return DualValue(v, v * a.partials)
    if f == "log":
        if a.value <= 0.0:
            raise EvalDomainError(f"log of non-positive value {a.value!r}", node)
        return DualValue(math.log(a.value), a.partials / a.value)
    if f == "sqrt":
        if a.value < 0.0:
            raise EvalDomainError(f"sqrt of negative value {a.value!r}", node)
        if a.value == 0.0:
            raise EvalDomainError("sqrt not differentiable at zero", node)
        v = math.sqrt(a.value)
        return DualValue(v, a.partials / (2.0 * v))
    if f == "abs":
        if a.value == 0.0:
            raise NonDifferentiableError("abs is not differentiable at 0", node)
        s = 1.0 if a.value > 0.0 else -1.0
        return DualValue(abs(a.value), s * a.partials)
    b = _eval_dual(node.args[1], duals)
    return _dual_pow(a, b, node)


def grad(ast: ExprAst, bindings: Sequence[float]) -> np.ndarray:
    """Exact gradient at a binding vector via one forward-mode pass."""
    n = ast.n_vars
    if len(bindings) != n:
        raise ExprError(f"expected {n} bindings, got {len(bindings)}")
    duals = [DualValue.variable(float(bindings[i]), i, n) for i in range(n)]
    if n == 0:
        return np.zeros(0)
    return _eval_dual(ast.root, duals).partials


# ---------------------------------------------------------------------------
# Printing (parse(to_string(ast)) evaluates identically to ast)

_NODE_PREC = {Num: 100, Var: 100, Call: 100, Neg: _UNARY_RBP}


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _LBP[node.op]
    return _NODE_PREC[type(node)]


def _wrap(s: str, need: bool) -> str:
    return "(" + s + ")" if need else s


def _fmt(node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return node.func + "(" + ", ".join(_fmt(a) for a in node.args) + ")"
    if isinstance(node, Neg):
        return "-" + _wrap(_fmt(node.arg), _prec(node.arg) < _UNARY_RBP)
    op = node.op
    lp = _LBP[op]
    if op == "^":
        # right-associative; the base must bind strictly tighter
        left = _wrap(_fmt(node.left), _prec(node.left) <= lp)
        right = _wrap(_fmt(node.right), _prec(node.right) < lp)
        return left + "^" + right
    left = _wrap(_fmt(node.left), _prec(node.left) < lp)
    # parenthesise equal precedence on the right so the tree shape (and the
    # exact float result) survives the round trip
    right = _wrap(_fmt(node.right), _prec(node.right) <= lp)
    return f"{left} {op} {right}"


def to_string(ast: ExprAst) -> str:
    return _fmt(ast.root)


# ---------------------------------------------------------------------------
# Compilation to plain Python (hot path for ODE right-hand sides)

_COMPILE_ENV = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_tan": math.tan,
    "_exp": math.exp,
    "_log": math.log,
    "_sqrt": math.sqrt,
    "_abs": abs,
    "_pow": math.pow,
}


def _codegen(node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x[{node.index}]"
    if isinstance(node, Neg):
        return f"(-{_codegen(node.arg)})"
    if isinstance(node, BinOp):
        a, b = _codegen(node.left), _codegen(node.right)
        if node.op == "^":
            return f"_pow({a}, {b})"
        return f"({a} {node.op} {b})"
    args = ", ".join(_codegen(a) for a in node.args)
    return f"_{node.func}({args})"


def compile_fn(ast: ExprAst) -> Callable[[Sequence[float]], float]:
    """Compile to a plain-Python callable, several times faster than the
    recursive evaluator and with identical values on the shared domain.

    Domain violations surface as ValueError / ZeroDivisionError /
    OverflowError from the math module rather than EvalDomainError; callers
    on hot paths catch those directly. ``math.pow`` is used for ``^`` so a
    negative base with fractional exponent raises instead of going complex.
    """
    src = f"def _compiled(x):\n    return {_codegen(ast.root)}\n"
    ns = dict(_COMPILE_ENV)
    exec(compile(src, f"<expr:{ast.source}>", "exec"), ns)
    fn = ns["_compiled"]
    fn.__doc__ = f"compiled from: {ast.source}"
    return fn


DOMAIN_EXCEPTIONS = (EvalDomainError, ValueError, ZeroDivisionError, OverflowError)
