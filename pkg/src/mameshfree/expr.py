"""Tiny arithmetic grammar for inline f/g/exact fields.

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := number | 'x' | 'y' | 'pi' | func '(' expr ')' | '(' expr ')'
    func   := exp | sin | cos | sqrt

Parsing yields a numpy-vectorized callable f(x, y).
"""
from __future__ import annotations

import re

import numpy as np

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\S))")
_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt}
_CONSTS = {"pi": np.pi}
_BINOPS = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # trailing whitespace only
            break
        num, name, op = m.groups()
        start = m.start(m.lastindex)
        if num is not None:
            out.append(("num", float(num), start))
        elif name is not None:
            out.append(("name", name, start))
        else:
            out.append(("op", op, start))
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, off = self.take()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", off)

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", off)
        return node

    def _binary(self, ops, operand):
        node = operand()
        while self.peek()[0] == "op" and self.peek()[1] in ops:
            fn = _BINOPS[self.take()[1]]
            node = (lambda a, b, f: lambda x, y: f(a(x, y), b(x, y)))(node, operand(), fn)
        return node

    def expr(self):
        return self._binary("+-", self.term)

    def term(self):
        return self._binary("*/", self.unary)

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.unary()
            return inner if val == "+" else (lambda x, y: -inner(x, y))
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            expo = self.unary()
            return lambda x, y: np.power(base(x, y), expo(x, y))
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return lambda x, y, v=val: np.full(np.shape(x), v)
        if kind == "name":
            if val == "x":
                return lambda x, y: np.asarray(x, float)
            if val == "y":
                return lambda x, y: np.asarray(y, float)
            if val in _CONSTS:
                return lambda x, y, v=_CONSTS[val]: np.full(np.shape(x), v)
            if val in _FUNCS:
                fn = _FUNCS[val]
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return lambda x, y: fn(arg(x, y))
            raise ExprSyntaxError(f"unknown name {val!r}", off)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off)
        raise ExprSyntaxError(f"unexpected {val!r}", off)


def parse_field_expr(text: str):
    """Compile ``text`` into a vectorized field f(x, y)."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text).parse()
