"""Tiny analytic-expression grammar for coefficient definitions in (t, s).

Grammar (usual precedence, ``^`` right-associative)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := unary ('^' factor)?          # '**' is accepted as an alias
    unary  := '-' unary | atom
    atom   := NUMBER | 'pi' | 'e' | 't' | 's'
            | ('exp' | 'ln' | 'sin' | 'cos') '(' expr ')'
            | '(' expr ')'

Coefficients written in the disk coordinates are rotation-invariant by
construction, which is exactly the admissible data class.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import ConfigError

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
                    r"|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^()]))")

_FUNCS = {"exp": np.exp, "ln": np.log, "sin": np.sin, "cos": np.cos}
_CONSTS = {"pi": math.pi, "e": math.e}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ConfigError("cannot tokenize expression at %r" % text[pos:pos + 12])
        num, name, op = m.groups()
        if num is not None:
            tokens.append(("num", float(num)))
        elif name is not None:
            tokens.append(("name", name))
        else:
            tokens.append(("op", "^" if op == "**" else op))
        pos = m.end()
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ConfigError("expected %r in expression %r" % (op, self.text))

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ConfigError("trailing tokens in expression %r" % self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.take()
            node = (op, node, self.factor())
        return node

    def factor(self):
        node = self.unary()
        if self.peek() == ("op", "^"):
            self.take()
            node = ("^", node, self.factor())
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return ("const", val)
        if kind == "name":
            if val in _CONSTS:
                return ("const", _CONSTS[val])
            if val in ("t", "s"):
                return ("var", val)
            if val in _FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return ("call", val, arg)
            raise ConfigError("unknown name %r in expression %r" % (val, self.text))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ConfigError("unexpected token %r in expression %r" % (val, self.text))


def _eval(node, t, s):
    tag = node[0]
    if tag == "const":
        return node[1]
    if tag == "var":
        return t if node[1] == "t" else s
    if tag == "neg":
        return -_eval(node[1], t, s)
    if tag == "call":
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _FUNCS[node[1]](_eval(node[2], t, s))
    a = _eval(node[1], t, s)
    b = _eval(node[2], t, s)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if tag == "+":
            return a + b
        if tag == "-":
            return a - b
        if tag == "*":
            return a * b
        if tag == "/":
            return a / b
        if tag == "^":
            return a**b
    raise ConfigError("unknown node %r" % (tag,))


def compile_expression(text: str):
    """Parse an expression in (t, s) and return a vectorized evaluator."""
    node = _Parser(str(text)).parse()

    def fn(t, s):
        out = _eval(node, np.asarray(t, dtype=float), np.asarray(s, dtype=float))
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(t, s).shape).copy()

    fn.source = text
    return fn
