"""A small arithmetic language for right-hand sides and boundary data.

Grammar (highest precedence first)::

    primary  := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'
    power    := primary ['^' unary]          # right associative
    unary    := '-' unary | '+' unary | power
    term     := unary (('*' | '/') unary)*
    expr     := term (('+' | '-') term)*

Names are the coordinates ``x0 .. x{4n-1}``, the level ``t`` and
``normq`` (sum of squared coordinates).  Functions: exp, log, abs, sqrt,
min, max.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

FUNCTIONS: dict[str, tuple[int, Callable]] = {
    "exp": (1, np.exp),
    "log": (1, np.log),
    "abs": (1, np.abs),
    "sqrt": (1, np.sqrt),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


class ExpressionError(ValueError):
    def __init__(self, message: str, column: int | None = None, text: str | None = None):
        self.column = column
        self.text = text
        where = f" at column {column}" if column is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Node", ...]


Node = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    column: int  # 1-based


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ExpressionError(f"unexpected character {text[col - 1]!r}", col, text)
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(Token("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def take(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ExpressionError(msg, tok.column, self.text)

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            found = repr(self.tok.text) if self.tok.kind != "end" else "end of input"
            self.error(f"expected {text!r}, found {found}")
        return self.take()

    def parse(self) -> Node:
        if self.tok.kind == "end":
            self.error("empty expression")
        node = self.expr()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.text == "-":
            self.take()
            return Neg(self.unary())
        if self.tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.tok.text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.take()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.take()
            if self.tok.text == "(":
                if tok.text not in FUNCTIONS:
                    self.error(f"unknown function {tok.text!r}", tok)
                self.take()
                args = [self.expr()]
                while self.tok.text == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[tok.text][0]
                if len(args) != arity:
                    self.error(f"{tok.text} takes {arity} argument(s), got {len(args)}", tok)
                return Call(tok.text, tuple(args))
            if tok.text in FUNCTIONS:
                self.error(f"function {tok.text!r} needs arguments", tok)
            return Var(tok.text)
        if tok.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        found = repr(tok.text) if tok.kind != "end" else "end of input"
        self.error(f"unexpected {found}")


def parse_expression(text: str) -> "Expression":
    return Expression(text, _Parser(text).parse())


def to_text(node: Node) -> str:
    """Print an AST so that parsing the result gives the same AST."""
    if isinstance(node, Num):
        return repr(node.value) if node.value >= 0 else f"({node.value!r})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}(" + ", ".join(to_text(a) for a in node.args) + ")"
    return f"({to_text(node.left)} {node.op} {to_text(node.right)})"


def variables(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        return set().union(*(variables(a) for a in node.args))
    return set()


def allowed_names(n: int, with_t: bool) -> set[str]:
    names = {f"x{i}" for i in range(4 * n)} | {"normq"}
    if with_t:
        names.add("t")
    return names


def _eval(node: Node, env: dict) -> np.ndarray:
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func][1](*(_eval(a, env) for a in node.args))
    a, b = _eval(node.left, env), _eval(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return np.power(a, b)


@dataclass(frozen=True)
class Expression:
    source: str
    ast: Node

    def __str__(self) -> str:
        return to_text(self.ast)

    @property
    def names(self) -> set[str]:
        return variables(self.ast)

    def check(self, n: int, with_t: bool) -> None:
        """Reject names outside the coordinates (and ``t`` if allowed)."""
        allowed = allowed_names(n, with_t)
        bad = sorted(self.names - allowed)
        if bad:
            m = re.search(rf"\b{re.escape(bad[0])}\b", self.source)
            col = m.start() + 1 if m else None
            raise ExpressionError(f"unknown identifier {bad[0]!r}", col, self.source)

    def evaluate(self, x, t=None) -> np.ndarray:
        """Evaluate at coordinates ``x`` of shape (..., 4n) and optional level ``t``."""
        x = np.asarray(x, dtype=float)
        env = {f"x{i}": x[..., i] for i in range(x.shape[-1])}
        env["normq"] = np.sum(x * x, axis=-1)
        if t is not None:
            env["t"] = np.asarray(t, dtype=float)
        missing = self.names - env.keys()
        if missing:
            raise ExpressionError(f"unbound variable {sorted(missing)[0]!r}")
        with np.errstate(all="ignore"):
            out = _eval(self.ast, env)
        shape = x.shape[:-1] if t is None else np.broadcast_shapes(x.shape[:-1], np.shape(t))
        return np.broadcast_to(np.asarray(out, dtype=float), shape)

    def field(self, n: int) -> Callable[[np.ndarray], np.ndarray]:
        self.check(n, with_t=False)
        return lambda x: self.evaluate(x)

    def rhs(self, n: int) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        self.check(n, with_t=True)
        return lambda x, t: self.evaluate(x, t)
