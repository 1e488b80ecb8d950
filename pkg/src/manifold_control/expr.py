"""Expression language over ``t, x1..xn, gamma`` with forward-mode derivatives.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = ("-" | "+") , unary | power ;
    power   = primary , [ "^" , unary ] ;            (* right associative *)
    primary = number | variable | func , "(" , expr , ")" | "(" , expr , ")" ;
    func    = "exp" | "ln" | "sin" | "cos" | "sqrt" ;
    variable = "t" | "gamma" | "x" , index ;        (* 1 <= index <= n *)
    number  = digits , [ "." , [digits] ] , [ exponent ] | "." , digits , [ exponent ] ;

Precedence runs ``^`` > unary minus > ``* /`` > ``+ -``, so ``-x1^2`` is
``-(x1^2)`` and ``2^-1`` is ``2^(-1)``.

Parsed expressions are compiled once into two straight-line Python functions:
a plain evaluator and a forward-mode one that carries a tangent for every
variable the expression references (dual-number arithmetic, all seeds in a
single pass). Both are pure and safe to call from many threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .errors import DomainError, ExpressionSyntaxError, UnboundVariableError, UnknownIdentifierError

FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt")


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Num | Var | Neg | BinOp | Call


# --------------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str
    pos: int  # 1-based


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(source):
        m = _TOKEN.match(source, i)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {source[i]!r}", i + 1, source)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), i + 1))
        i = m.end()
    tokens.append(_Token("end", "", len(source) + 1))
    return tokens


class _Parser:
    def __init__(self, source: str, n: int):
        self.source = source
        self.n = n
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.tok
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExpressionSyntaxError(f"{message}, found {what}", tok.pos, self.source)

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        if self.tok.text != text or self.tok.kind != "op":
            self.error(f"expected {text!r}")
        self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            self.error("unexpected token")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name in ("t", "gamma"):
                return Var(name)
            m = re.fullmatch(r"x([1-9][0-9]*)", name)
            if m:
                index = int(m.group(1))
                if index > self.n:
                    raise UnknownIdentifierError(
                        f"variable index out of range: {name} (n={self.n})", tok.pos, self.source
                    )
                return Var(name)
            raise UnknownIdentifierError(f"unknown identifier {name!r}", tok.pos, self.source)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.error("expected a number, variable, function or '('")


def _collect_vars(node: Node, out: set[str]) -> set[str]:
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Neg | Call):
        _collect_vars(node.arg, out)
    elif isinstance(node, BinOp):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    return out


def to_text(node: Node) -> str:
    """Canonical, fully parenthesised form; re-parses to an identical AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)}{node.op}{to_text(node.right)})"
    return f"{node.func}({to_text(node.arg)})"


# ---------------------------------------------------------------------- codegen


def _pow(a: float, b: float) -> float:
    if a < 0.0 and not b.is_integer():
        raise DomainError(f"negative base {a!r} with non-integer exponent {b!r}")
    return a**b


_RUNTIME = {
    "_exp": math.exp,
    "_ln": math.log,
    "_sin": math.sin,
    "_cos": math.cos,
    "_sqrt": math.sqrt,
    "_pow": _pow,
    "_isfinite": math.isfinite,
}


class _Emitter:
    """Lowers an AST to straight-line code, optionally with tangents."""

    def __init__(self, seeds: Sequence[str], with_tangents: bool):
        self.seeds = list(seeds)
        self.with_tangents = with_tangents
        self.lines: list[str] = []
        self.count = 0

    def fresh(self) -> str:
        self.count += 1
        return f"v{self.count}"

    def assign(self, rhs: str) -> str:
        name = self.fresh()
        self.lines.append(f"{name} = {rhs}")
        return name

    def tangent(self, parts: list[str | None], build) -> list[str | None]:
        """Emit one tangent line per seed; ``None`` marks a known zero."""
        out: list[str | None] = []
        for j in range(len(self.seeds)):
            expr = build(j)
            if expr is None:
                out.append(None)
            else:
                out.append(self.assign(expr))
        return out

    def emit(self, node: Node) -> tuple[str, list[str | None]]:
        k = len(self.seeds)
        if isinstance(node, Num):
            return repr(node.value), [None] * k
        if isinstance(node, Var):
            dv = [("1.0" if s == node.name else None) for s in self.seeds]
            return node.name, dv
        if isinstance(node, Neg):
            a, da = self.emit(node.arg)
            v = self.assign(f"-{a}")
            if not self.with_tangents:
                return v, []
            return v, self.tangent(da, lambda j: None if da[j] is None else f"-{da[j]}")
        if isinstance(node, Call):
            return self._call(node)
        return self._binop(node)

    def _call(self, node: Call):
        a, da = self.emit(node.arg)
        v = self.assign(f"_{node.func}({a})")
        if not self.with_tangents:
            return v, []
        if node.func == "exp":
            scale = v
        elif node.func == "ln":
            scale = self.assign(f"1.0 / {a}")
        elif node.func == "sin":
            scale = self.assign(f"_cos({a})") if any(d is not None for d in da) else None
        elif node.func == "cos":
            scale = self.assign(f"-_sin({a})") if any(d is not None for d in da) else None
        else:  # sqrt
            scale = self.assign(f"0.5 / {v}") if any(d is not None for d in da) else None
        return v, self.tangent(da, lambda j: None if da[j] is None else f"{scale} * {da[j]}")

    def _binop(self, node: BinOp):
        a, da = self.emit(node.left)
        b, db = self.emit(node.right)
        op = node.op
        if op == "^":
            v = self.assign(f"_pow({a}, {b})")
        else:
            v = self.assign(f"{a} {op} {b}")
        if not self.with_tangents:
            return v, []

        if op in "+-":
            def build(j):
                if da[j] is None and db[j] is None:
                    return None
                if db[j] is None:
                    return da[j]
                if da[j] is None:
                    return db[j] if op == "+" else f"-{db[j]}"
                return f"{da[j]} {op} {db[j]}"
        elif op == "*":
            def build(j):
                terms = []
                if da[j] is not None:
                    terms.append(f"{da[j]} * {b}")
                if db[j] is not None:
                    terms.append(f"{a} * {db[j]}")
                return " + ".join(terms) or None
        elif op == "/":
            def build(j):
                if da[j] is None and db[j] is None:
                    return None
                if db[j] is None:
                    return f"{da[j]} / {b}"
                if da[j] is None:
                    return f"-{v} * {db[j]} / {b}"
                return f"({da[j]} - {v} * {db[j]}) / {b}"
        else:
            base_active = any(d is not None for d in da)
            exp_active = any(d is not None for d in db)
            dbase = self.assign(f"{b} * _pow({a}, {b} - 1.0)") if base_active else None
            dexp = self.assign(f"{v} * _ln({a})") if exp_active else None

            def build(j):
                terms = []
                if da[j] is not None:
                    terms.append(f"{dbase} * {da[j]}")
                if db[j] is not None:
                    terms.append(f"{dexp} * {db[j]}")
                return " + ".join(terms) or None
        return v, self.tangent([], build)


def _compile(node: Node, n: int, variables: frozenset[str], with_tangents: bool, source: str):
    seeds = ["t"] + [f"x{i}" for i in range(1, n + 1)] + ["gamma"]
    active = [s for s in seeds if s in variables] if with_tangents else []
    em = _Emitter(active, with_tangents)
    value, tangents = em.emit(node)

    outs = [value]
    if with_tangents:
        lookup = dict(zip(active, tangents))
        for s in seeds:
            d = lookup.get(s)
            outs.append("0.0" if d is None else d)

    body = []
    for i in range(1, n + 1):
        if f"x{i}" in variables:
            body.append(f"x{i} = x[{i - 1}]")
    body.append("try:")
    body.extend("    " + line for line in em.lines or ["pass"])
    body.append("except DomainError:")
    body.append("    raise")
    body.append("except (ArithmeticError, ValueError) as exc:")
    body.append("    raise DomainError(f'{_src}: {exc}') from None")
    body.append(f"out = ({', '.join(outs)},)")
    body.append("for _o in out:")
    body.append("    if not _isfinite(_o):")
    body.append("        raise DomainError(f'{_src}: non-finite result')")
    body.append("return out")
    code = "def _fn(t, x, gamma):\n" + "\n".join("    " + line for line in body) + "\n"
    ns = dict(_RUNTIME, DomainError=DomainError, _src=source)
    exec(compile(code, f"<expr {source!r}>", "exec"), ns)
    return ns["_fn"], code


# ------------------------------------------------------------------- public API


class Gradient(NamedTuple):
    value: float
    dt: float
    dx: tuple[float, ...]
    dgamma: float


@dataclass(frozen=True)
class Bindings:
    t: float = 0.0
    x: tuple[float, ...] = ()
    gamma: float | None = None


@dataclass(frozen=True, eq=False)
class Expression:
    source: str
    n: int
    root: Node
    variables: frozenset[str]
    _value_fn: object = field(repr=False)
    _grad_fn: object = field(repr=False)

    def __reduce__(self):
        return parse, (self.source, self.n)

    @property
    def is_constant(self) -> bool:
        return not self.variables

    def _check(self, x, gamma):
        if len(x) != self.n:
            raise UnboundVariableError(f"expected {self.n} state values, got {len(x)}")
        if gamma is None and "gamma" in self.variables:
            raise UnboundVariableError(f"'gamma' is unbound in {self.source!r}")

    def value(self, t: float, x: Sequence[float], gamma: float | None = None) -> float:
        self._check(x, gamma)
        return self._value_fn(t, x, gamma)[0]

    def grad(self, t: float, x: Sequence[float], gamma: float | None = None) -> Gradient:
        self._check(x, gamma)
        out = self._grad_fn(t, x, gamma)
        return Gradient(out[0], out[1], out[2 : 2 + self.n], out[2 + self.n])

    def raw_value(self, t: float, x: Sequence[float], gamma: float | None = None) -> float:
        """Unchecked fast path for :meth:`value`."""
        return self._value_fn(t, x, gamma)[0]

    def raw_grad(self, t: float, x: Sequence[float], gamma: float | None = None) -> tuple:
        """Unchecked fast path: ``(value, d/dt, d/dx1..d/dxn, d/dgamma)``."""
        return self._grad_fn(t, x, gamma)

    def __str__(self) -> str:
        return to_text(self.root)


def parse(source: str, n: int) -> Expression:
    """Parse ``source`` over the state dimension ``n`` (n >= 2)."""
    if n < 2:
        raise ValueError(f"state dimension must be >= 2, got {n}")
    if not source or not source.strip():
        raise ExpressionSyntaxError("empty expression", 1, source)
    root = _Parser(source, n).parse()
    variables = frozenset(_collect_vars(root, set()))
    value_fn, _ = _compile(root, n, variables, False, source)
    grad_fn, _ = _compile(root, n, variables, True, source)
    return Expression(source, n, root, variables, value_fn, grad_fn)


def evaluate(e: Expression, b: Bindings) -> float:
    return e.value(b.t, b.x, b.gamma)


def gradient(e: Expression, b: Bindings) -> Gradient:
    """Value and exact first partials. ``dgamma`` is 0 when gamma is unbound."""
    return e.grad(b.t, b.x, b.gamma)
