"""Tiny analytic-expression grammar for scenario boundary data.

Supported: variables ``t``, ``x``, ``y`` (plus ``nx``, ``ny`` for the
outward normal in traction expressions), numbers, the constant ``pi``,
operators ``+ - * / ^`` with unary minus, parentheses, and the functions
``sin``, ``cos``, ``exp``.  Expressions evaluate vectorized over numpy
arrays, and can be differentiated with respect to the spatial variables
(needed for analytic gradient initial data), provided every exponent is a
constant.
"""

import re

import numpy as np

from .errors import ParseError

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
                    r"|\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)"
                    r"|(\*\*|[-+*/^(),]))")

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTANTS = {"pi": np.pi}
_VARIABLES = ("t", "x", "y", "nx", "ny")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ParseError("cannot tokenize %r (at %r)" % (text, rest[:10]))
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
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, expect=None):
        kind, value = self.tokens[self.pos]
        if expect is not None and (kind, value) != expect:
            raise ParseError("expected %r in %r, got %r"
                             % (expect[1], self.text, value))
        self.pos += 1
        return kind, value

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ParseError("trailing input in %r" % self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            rhs = self.term()
            node = (op, node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.take()
            rhs = self.factor()
            node = (op, node, rhs)
        return node

    def factor(self):
        # unary minus binds looser than the power: -x^2 == -(x^2)
        if self.peek() == ("op", "-"):
            self.take()
            return ("neg", self.factor())
        if self.peek() == ("op", "+"):
            self.take()
            return self.factor()
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            rhs = self.factor()  # right associative; exponent may be signed
            return ("^", node, rhs)
        return node

    def atom(self):
        kind, value = self.take()
        if kind == "num":
            return ("num", value)
        if kind == "name":
            if value in _FUNCTIONS:
                self.take(("op", "("))
                arg = self.expr()
                self.take(("op", ")"))
                return ("call", value, arg)
            if value in _CONSTANTS:
                return ("num", _CONSTANTS[value])
            if value in _VARIABLES:
                return ("var", value)
            raise ParseError("unknown name %r in %r" % (value, self.text))
        if (kind, value) == ("op", "("):
            node = self.expr()
            self.take(("op", ")"))
            return node
        raise ParseError("unexpected token %r in %r" % (value, self.text))


def parse(text):
    """Parse one expression into an AST (nested tuples)."""
    return _Parser(text).parse()


def split_components(text):
    """Split a comma-separated component list at top-level commas."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return [p.strip() for p in parts]


def parse_vector(text, n_components):
    parts = split_components(text)
    if len(parts) != n_components:
        raise ParseError("expected %d comma-separated components in %r, "
                         "got %d" % (n_components, text, len(parts)))
    return [parse(p) for p in parts]


def evaluate(node, env):
    """Evaluate an AST over an environment of numpy arrays/scalars."""
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        if node[1] not in env:
            raise ParseError("variable %r not available here" % node[1])
        return env[node[1]]
    if kind == "neg":
        return -evaluate(node[1], env)
    if kind == "call":
        return _FUNCTIONS[node[1]](evaluate(node[2], env))
    a = evaluate(node[1], env)
    b = evaluate(node[2], env)
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    if kind == "/":
        return a / b
    if kind == "^":
        return a ** b
    raise ParseError("corrupt expression node %r" % (kind,))


def _is_const(node):
    return node[0] == "num"


def derivative(node, var):
    """Symbolic derivative with respect to `var` ('x' or 'y').

    Exponents must be constants (sufficient for the supported grammar's
    use as analytic initial/boundary data).
    """
    kind = node[0]
    if kind == "num":
        return ("num", 0.0)
    if kind == "var":
        return ("num", 1.0 if node[1] == var else 0.0)
    if kind == "neg":
        return ("neg", derivative(node[1], var))
    if kind == "call":
        inner = derivative(node[2], var)
        if node[1] == "sin":
            outer = ("call", "cos", node[2])
        elif node[1] == "cos":
            outer = ("neg", ("call", "sin", node[2]))
        else:  # exp
            outer = node
        return ("*", outer, inner)
    a, b = node[1], node[2]
    da, db = derivative(a, var), derivative(b, var)
    if kind == "+":
        return ("+", da, db)
    if kind == "-":
        return ("-", da, db)
    if kind == "*":
        return ("+", ("*", da, b), ("*", a, db))
    if kind == "/":
        return ("/", ("-", ("*", da, b), ("*", a, db)), ("*", b, b))
    if kind == "^":
        if not _is_const(b):
            raise ParseError("cannot differentiate a power with non-constant "
                             "exponent")
        p = b[1]
        return ("*", ("*", ("num", p), ("^", a, ("num", p - 1.0))), da)
    raise ParseError("corrupt expression node %r" % (kind,))


def uses_variable(node, var):
    kind = node[0]
    if kind == "num":
        return False
    if kind == "var":
        return node[1] == var
    if kind in ("neg",):
        return uses_variable(node[1], var)
    if kind == "call":
        return uses_variable(node[2], var)
    return uses_variable(node[1], var) or uses_variable(node[2], var)


def vector_evaluator(nodes):
    """Bind vector-valued ASTs into a callable of (t, points[, normals])
    returning stacked vectors with one trailing component axis."""
    def call(t, points, normals=None):
        points = np.asarray(points, dtype=float)
        env = {"t": t, "x": points[..., 0], "y": points[..., 1]}
        if normals is not None:
            normals = np.asarray(normals, dtype=float)
            env["nx"] = normals[..., 0]
            env["ny"] = normals[..., 1]
        cols = [np.broadcast_to(np.asarray(evaluate(n, env), dtype=float),
                                points.shape[:-1]) for n in nodes]
        return np.stack(cols, axis=-1)
    return call


def scalar_evaluator(node):
    def call(t, points, normals=None):
        points = np.asarray(points, dtype=float)
        env = {"t": t, "x": points[..., 0], "y": points[..., 1]}
        if normals is not None:
            normals = np.asarray(normals, dtype=float)
            env["nx"] = normals[..., 0]
            env["ny"] = normals[..., 1]
        value = np.asarray(evaluate(node, env), dtype=float)
        return np.broadcast_to(value, points.shape[:-1])
    return call


def gradient_evaluator(nodes):
    """Analytic spatial gradient of a vector expression, as a callable of
    (t, points) returning stacked matrices with rows = components."""
    grads = [[derivative(n, "x"), derivative(n, "y")] for n in nodes]

    def call(t, points):
        points = np.asarray(points, dtype=float)
        env = {"t": t, "x": points[..., 0], "y": points[..., 1]}
        rows = []
        for row in grads:
            entries = [np.broadcast_to(np.asarray(evaluate(g, env),
                                                  dtype=float),
                                       points.shape[:-1]) for g in row]
            rows.append(np.stack(entries, axis=-1))
        return np.stack(rows, axis=-2)
    return call
