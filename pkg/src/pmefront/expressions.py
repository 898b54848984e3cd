"""Arithmetic expression mini-language for run configs.

Supports +, -, *, /, ^ (right associative), parentheses, the functions
sin, cos, exp, the variables x, y, t, the constant pi, and any extra names
bound by the run config (e.g. m).  Evaluation is vectorized over numpy
arrays.  Parse failures carry the source position.
"""

import numpy as np

from .errors import ExpressionParseError

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


class _Tokenizer:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def peek(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take_number(self):
        start = self.pos
        seen_dot = seen_exp = False
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch.isdigit():
                self.pos += 1
            elif ch == "." and not seen_dot and not seen_exp:
                seen_dot = True
                self.pos += 1
            elif ch in "eE" and not seen_exp and self.pos > start:
                nxt = self.text[self.pos + 1:self.pos + 2]
                if nxt.isdigit() or nxt in "+-":
                    seen_exp = True
                    self.pos += 2 if nxt in "+-" else 1
                else:
                    break
            else:
                break
        try:
            return float(self.text[start:self.pos])
        except ValueError:
            raise ExpressionParseError(
                f"bad number {self.text[start:self.pos]!r}", start)

    def take_name(self):
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum()
                                             or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start:self.pos]


class _Parser:
    """Recursive descent producing a closure env -> value."""

    def __init__(self, text):
        self.tk = _Tokenizer(text)

    def parse(self):
        node = self._sum()
        if self.tk.peek():
            raise ExpressionParseError(
                f"unexpected character {self.tk.peek()!r}", self.tk.pos)
        return node

    def _sum(self):
        node = self._product()
        while True:
            ch = self.tk.peek()
            if ch == "+":
                self.tk.pos += 1
                rhs = self._product()
                node = _binop(np.add, node, rhs)
            elif ch == "-":
                self.tk.pos += 1
                rhs = self._product()
                node = _binop(np.subtract, node, rhs)
            else:
                return node

    def _product(self):
        node = self._unary()
        while True:
            ch = self.tk.peek()
            if ch == "*":
                self.tk.pos += 1
                node = _binop(np.multiply, node, self._unary())
            elif ch == "/":
                self.tk.pos += 1
                node = _binop(np.divide, node, self._unary())
            else:
                return node

    def _unary(self):
        if self.tk.peek() == "-":
            self.tk.pos += 1
            inner = self._unary()
            return lambda env: -inner(env)
        return self._power()

    def _power(self):
        base = self._atom()
        if self.tk.peek() == "^":
            self.tk.pos += 1
            expo = self._unary()      # right associative, binds unary minus
            return _binop(np.power, base, expo)
        return base

    def _atom(self):
        ch = self.tk.peek()
        pos = self.tk.pos
        if ch == "(":
            self.tk.pos += 1
            node = self._sum()
            if self.tk.peek() != ")":
                raise ExpressionParseError("expected ')'", self.tk.pos)
            self.tk.pos += 1
            return node
        if ch.isdigit() or ch == ".":
            val = self.tk.take_number()
            return lambda env: val
        if ch.isalpha() or ch == "_":
            name = self.tk.take_name()
            if self.tk.peek() == "(":
                fn = _FUNCTIONS.get(name)
                if fn is None:
                    raise ExpressionParseError(
                        f"unknown function {name!r}", pos)
                self.tk.pos += 1
                arg = self._sum()
                if self.tk.peek() != ")":
                    raise ExpressionParseError("expected ')'", self.tk.pos)
                self.tk.pos += 1
                return lambda env: fn(arg(env))
            return _lookup(name, pos)
        raise ExpressionParseError(f"unexpected character {ch!r}", pos)


def _binop(op, a, b):
    return lambda env: op(a(env), b(env))


def _lookup(name, pos):
    def node(env):
        try:
            return env[name]
        except KeyError:
            raise ExpressionParseError(f"unknown name {name!r}", pos) \
                from None
    return node


class Expression:
    """Compiled expression; call with keyword bindings (arrays or scalars)."""

    def __init__(self, text, constants=None):
        self.text = text
        self._constants = dict(constants or {})
        self._node = _Parser(text).parse()

    def __call__(self, **bindings):
        env = {"pi": np.pi}
        env.update(self._constants)
        env.update(bindings)
        return self._node(env)

    def __repr__(self):
        return f"Expression({self.text!r})"


def compile_expression(text, constants=None):
    return Expression(text, constants)
