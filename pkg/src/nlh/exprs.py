"""Minimal arithmetic expression grammar for kernel and nonlinearity profiles.

Grammar (documented in the README):

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | atom ('^' factor)?   # power right-associative,
                                                 # unary minus binds looser
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Functions: sin, cos, exp, abs, min, max (min/max take two arguments).
Constants: pi.  Variable names are supplied by the caller; kernel profiles use
t, x, z, r (=|z|) in one dimension and t, x1, x2, z1, z2, r in two; scalar
nonlinearities use u.
"""

from __future__ import annotations

import math
import re

import numpy as np

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
}

_CONSTS = {"pi": math.pi}


class ExpressionError(ValueError):
    pass


def _tokenize(src: str) -> list[str]:
    tokens, pos = [], 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise ExpressionError(f"bad character at position {pos}: {src[pos:pos+8]!r}")
        tokens.append(m.group("num") or m.group("name") or m.group("op"))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise ExpressionError(f"expected {expected!r}, got {tok!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek() is not None:
            raise ExpressionError(f"trailing input at token {self.peek()!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() in ("*", "/"):
            op = self.take()
            node = (op, node, self.factor())
        return node

    def factor(self):
        # unary minus binds looser than the (right-associative) power,
        # so -x^2 is -(x^2) while 2^-x still parses
        if self.peek() == "-":
            self.take()
            return ("neg", self.factor())
        base = self.atom()
        if self.peek() in ("^", "**"):
            self.take()
            return ("^", base, self.factor())
        return base

    def atom(self):
        tok = self.take()
        if re.fullmatch(r"\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?", tok):
            return ("num", float(tok))
        if tok == "(":
            node = self.expr()
            self.take(")")
            return node
        if re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", tok):
            if self.peek() == "(":
                if tok not in _FUNCS:
                    raise ExpressionError(f"unknown function {tok!r}")
                self.take("(")
                args = [self.expr()]
                while self.peek() == ",":
                    self.take(",")
                    args.append(self.expr())
                self.take(")")
                want = 2 if tok in ("min", "max") else 1
                if len(args) != want:
                    raise ExpressionError(f"{tok} takes {want} argument(s)")
                return ("call", tok, args)
            if tok in _CONSTS:
                return ("num", _CONSTS[tok])
            return ("var", tok)
        raise ExpressionError(f"unexpected token {tok!r}")


def _eval(node, env):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        try:
            return env[node[1]]
        except KeyError:
            raise ExpressionError(f"unknown variable {node[1]!r}") from None
    if kind == "neg":
        return -_eval(node[1], env)
    if kind == "call":
        return _FUNCS[node[1]](*[_eval(a, env) for a in node[2]])
    a, b = _eval(node[1], env), _eval(node[2], env)
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    if kind == "/":
        return a / b
    if kind == "^":
        return a**b
    raise ExpressionError(f"bad node {node!r}")


class Expression:
    """Compiled expression over a fixed variable set, numpy-vectorized."""

    def __init__(self, source: str, variables: tuple[str, ...]):
        self.source = source
        self.variables = tuple(variables)
        self._ast = _Parser(_tokenize(source)).parse()
        self._check_vars(self._ast)

    def _check_vars(self, node):
        if node[0] == "var" and node[1] not in self.variables:
            raise ExpressionError(
                f"variable {node[1]!r} not allowed; expected one of {self.variables}"
            )
        for child in node[1:]:
            if isinstance(child, tuple):
                self._check_vars(child)
            elif isinstance(child, list):
                for c in child:
                    self._check_vars(c)

    def __call__(self, **env):
        missing = set(self.variables) - set(env)
        if missing:
            raise ExpressionError(f"missing variables {sorted(missing)}")
        out = _eval(self._ast, env)
        return np.asarray(out, dtype=float) if np.ndim(out) else float(out)

    def __repr__(self):
        return f"Expression({self.source!r}, vars={self.variables})"
