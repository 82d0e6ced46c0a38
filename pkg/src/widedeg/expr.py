"""Tiny arithmetic language for right-hand sides and boundary data.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | FUNC "(" expr ("," expr)* ")" | "(" expr ")"

Names are ``x``, ``y`` and ``s``; functions are ``exp`` and ``abs`` (one
argument) and ``min``/``max`` (two).  ``^`` is right associative and binds
tighter than unary minus, so ``-2^2 == -4``.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import InvalidInputError

__all__ = ["Expression", "ExpressionError", "parse"]

VARIABLES = ("x", "y", "s")
FUNCTIONS = {"exp": (1, np.exp), "abs": (1, np.abs), "min": (2, np.minimum), "max": (2, np.maximum)}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


class ExpressionError(InvalidInputError):
    pass


def _tokenize(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExpressionError(f"unexpected character {text[pos:].strip()[:1]!r} at {pos}")
        pos = m.end()
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0
        self.names = set()

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ExpressionError(f"expected {value!r}, found {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ExpressionError(f"trailing input at {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self):
        if self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = self.unary()
            return ("neg", node) if op == "-" else node
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return ("num", float(val))
        if kind == "name":
            self.take()
            if val in FUNCTIONS:
                arity, _ = FUNCTIONS[val]
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if len(args) != arity:
                    raise ExpressionError(f"{val}() takes {arity} argument(s), got {len(args)}")
                return ("call", val, *args)
            if val in VARIABLES:
                self.names.add(val)
                return ("var", val)
            raise ExpressionError(f"unknown name {val!r}")
        if val == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        raise ExpressionError(f"unexpected token {val!r}")


_BINARY = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide, "pow": np.power}


def _eval(node, env):
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "var":
        return env[node[1]]
    if tag == "neg":
        return -_eval(node[1], env)
    if tag == "call":
        fn = FUNCTIONS[node[1]][1]
        return fn(*(_eval(a, env) for a in node[2:]))
    return _BINARY[tag](_eval(node[1], env), _eval(node[2], env))


class Expression:
    """Compiled expression; call with keyword arrays ``x``, ``y``, ``s``."""

    def __init__(self, text):
        if not isinstance(text, str) or not text.strip():
            raise ExpressionError("empty expression")
        parser = _Parser(text)
        self.text = text
        self.tree = parser.parse()
        self.names = frozenset(parser.names)

    def __call__(self, x=0.0, y=0.0, s=0.0):
        env = {"x": np.asarray(x, dtype=float), "y": np.asarray(y, dtype=float),
               "s": np.asarray(s, dtype=float)}
        with np.errstate(all="ignore"):
            out = _eval(self.tree, env)
        shape = np.broadcast_shapes(*(np.shape(env[k]) for k in VARIABLES))
        return np.broadcast_to(np.asarray(out, dtype=float), shape)

    def depends_on(self, name):
        return name in self.names

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse(text):
    return Expression(text)
