"""A small arithmetic expression language for user-supplied maps.

Grammar (``^`` binds tighter than unary minus and is right-associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | "exp" "(" expr ")" | "(" expr ")"

Names are ``X``, ``Y`` and any constant supplied by the caller. Parsed
expressions compile to closures that broadcast over numpy arrays.
"""

from __future__ import annotations

import re
from typing import Callable

import numpy as np

Compiled = Callable[[np.ndarray, np.ndarray], np.ndarray]

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|([A-Za-z_]\w*)|(\*\*|[-+*/^()]))")
FUNCTIONS = {"exp": np.exp}


class ExprError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at column {pos + 1}: {text!r}")
        self.pos = pos


def tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExprError("unexpected character", text, pos + len(text[pos:]) - len(text[pos:].lstrip()))
        num, name, op = m.groups()
        start = m.start(m.lastindex)
        if num is not None:
            out.append(("num", num, start))
        elif name is not None:
            out.append(("name", name, start))
        else:
            out.append(("op", "^" if op == "**" else op, start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, constants: dict[str, float]):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.constants = constants

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind != "op":
            raise ExprError(f"expected {value!r}", self.text, pos)

    def parse(self) -> Compiled:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected {val!r}", self.text, pos)
        return node

    def expr(self) -> Compiled:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = _binary(op, node, rhs)
        return node

    def term(self) -> Compiled:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = _binary(op, node, rhs)
        return node

    def unary(self) -> Compiled:
        kind, val, _ = self.peek()
        if kind == "op" and val in ("+", "-"):
            self.take()
            inner = self.unary()
            if val == "+":
                return inner
            return lambda x, y: -inner(x, y)
        return self.power()

    def power(self) -> Compiled:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            exponent = self.unary()
            return _binary("^", base, exponent)
        return base

    def atom(self) -> Compiled:
        kind, val, pos = self.take()
        if kind == "num":
            c = float(val)
            return lambda x, y: c
        if kind == "name":
            if val in FUNCTIONS:
                fn = FUNCTIONS[val]
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return lambda x, y: fn(arg(x, y))
            if val == "X":
                return lambda x, y: x
            if val == "Y":
                return lambda x, y: y
            if val in self.constants:
                c = float(self.constants[val])
                return lambda x, y: c
            raise ExprError(f"unknown name {val!r}", self.text, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprError("expected a number, name or '('" if kind != "end" else "unexpected end of input",
                        self.text, pos)


def _binary(op: str, a: Compiled, b: Compiled) -> Compiled:
    if op == "+":
        return lambda x, y: a(x, y) + b(x, y)
    if op == "-":
        return lambda x, y: a(x, y) - b(x, y)
    if op == "*":
        return lambda x, y: a(x, y) * b(x, y)
    if op == "/":
        return lambda x, y: a(x, y) / b(x, y)
    return lambda x, y: np.power(a(x, y), b(x, y))


def compile_expr(text: str, constants: dict[str, float] | None = None) -> Compiled:
    """Compile ``text`` into ``f(X, Y)``.

    The result always returns an array shaped like the broadcast of its
    inputs, even for constant expressions.
    """
    inner = _Parser(text, dict(constants or {})).parse()

    def f(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.asarray(inner(x, y), dtype=float)
        shape = np.broadcast(x, y).shape
        out = np.broadcast_to(out, shape).copy() if out.shape != shape else out
        return out[()] if out.ndim == 0 else out

    return f
