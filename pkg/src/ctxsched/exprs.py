"""Small arithmetic/boolean expression language over named values.

One grammar serves three places: score functions over stream values,
context-rule conditions, and complex-task satisfaction rules. Expressions
reference names (optionally with dotted field access into record payloads,
e.g. ``imu.mag``) and combine them with arithmetic, comparisons, ``and`` /
``or`` / ``not`` and a few functions (``min``, ``max``, ``abs``, ``clamp``,
``k_of``). Every expression evaluates to a float; comparisons and boolean
operators yield 1.0 / 0.0, and any value is truthy iff it is nonzero.

Grammar (precedence low to high)::

    expr       := or_expr
    or_expr    := and_expr ("or" and_expr)*
    and_expr   := not_expr ("and" not_expr)*
    not_expr   := "not" not_expr | comparison
    comparison := sum (("<"|"<="|">"|">="|"=="|"!=") sum)?
    sum        := term (("+"|"-") term)*
    term       := unary (("*"|"/") unary)*
    unary      := "-" unary | atom
    atom       := NUMBER | call | ref | "(" expr ")"
    call       := NAME "(" expr ("," expr)* ")"
    ref        := NAME ("." NAME)*
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any, Mapping


class ExprError(Exception):
    """Base class for expression failures."""


class ExprSyntaxError(ExprError):
    """The expression text does not parse."""


class ExprEvalError(ExprError):
    """The expression parsed but cannot be evaluated on the given values."""


class MissingNameError(ExprEvalError):
    """A referenced name has no value in the environment."""

    def __init__(self, name: str):
        super().__init__(f"no value for {name!r}")
        self.name = name


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|==|!=|[-+*/(),.<>]))"
)

_KEYWORDS = ("and", "or", "not")

_FUNCTIONS = {
    "min": (2, None),
    "max": (2, None),
    "abs": (1, 1),
    "clamp": (3, 3),
    "k_of": (2, None),
}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip():
                raise ExprSyntaxError(f"bad character {text[pos:].strip()[0]!r} in {text!r}")
            break
        pos = m.end()
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num")))
        elif m.lastgroup == "name":
            name = m.group("name")
            tokens.append(("kw", name) if name in _KEYWORDS else ("name", name))
        else:
            tokens.append(("op", m.group("op")))
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str]:
        return self.tokens[self.pos]

    def next(self) -> tuple[str, str]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, value: str) -> None:
        tok = self.next()
        if tok != (kind, value):
            raise ExprSyntaxError(f"expected {value!r}, got {tok[1]!r} in {self.text!r}")

    def parse(self) -> tuple:
        node = self.or_expr()
        if self.peek()[0] != "end":
            raise ExprSyntaxError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return node

    def or_expr(self) -> tuple:
        node = self.and_expr()
        while self.peek() == ("kw", "or"):
            self.next()
            node = ("or", node, self.and_expr())
        return node

    def and_expr(self) -> tuple:
        node = self.not_expr()
        while self.peek() == ("kw", "and"):
            self.next()
            node = ("and", node, self.not_expr())
        return node

    def not_expr(self) -> tuple:
        if self.peek() == ("kw", "not"):
            self.next()
            return ("not", self.not_expr())
        return self.comparison()

    def comparison(self) -> tuple:
        node = self.sum()
        kind, value = self.peek()
        if kind == "op" and value in ("<", "<=", ">", ">=", "==", "!="):
            self.next()
            node = ("cmp", value, node, self.sum())
        return node

    def sum(self) -> tuple:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            node = ("bin", op, node, self.term())
        return node

    def term(self) -> tuple:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            node = ("bin", op, node, self.unary())
        return node

    def unary(self) -> tuple:
        if self.peek() == ("op", "-"):
            self.next()
            return ("neg", self.unary())
        return self.atom()

    def atom(self) -> tuple:
        kind, value = self.next()
        if kind == "num":
            return ("num", float(value))
        if kind == "op" and value == "(":
            node = self.or_expr()
            self.expect("op", ")")
            return node
        if kind == "name":
            if self.peek() == ("op", "("):
                return self.call(value)
            path = []
            while self.peek() == ("op", "."):
                self.next()
                field = self.next()
                if field[0] != "name":
                    raise ExprSyntaxError(f"expected field name after '.' in {self.text!r}")
                path.append(field[1])
            return ("ref", value, tuple(path))
        raise ExprSyntaxError(f"unexpected {value!r} in {self.text!r}")

    def call(self, fname: str) -> tuple:
        if fname not in _FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {fname!r}")
        self.expect("op", "(")
        args = [self.or_expr()]
        while self.peek() == ("op", ","):
            self.next()
            args.append(self.or_expr())
        self.expect("op", ")")
        lo, hi = _FUNCTIONS[fname]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ExprSyntaxError(f"{fname} takes {lo}{'+' if hi is None else f'..{hi}'} arguments")
        return ("call", fname, tuple(args))


def _lookup(env: Mapping[str, Any], name: str, path: tuple[str, ...]) -> float:
    if name not in env:
        raise MissingNameError(name)
    value = env[name]
    for field in path:
        if not isinstance(value, Mapping) or field not in value:
            raise ExprEvalError(f"{name}.{'.'.join(path)}: no field {field!r} in payload")
        value = value[field]
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if not isinstance(value, (int, float)):
        raise ExprEvalError(f"{name}{'.' + '.'.join(path) if path else ''} is not numeric")
    return float(value)


def _eval(node: tuple, env: Mapping[str, Any]) -> float:
    op = node[0]
    if op == "num":
        return node[1]
    if op == "ref":
        return _lookup(env, node[1], node[2])
    if op == "neg":
        return -_eval(node[1], env)
    if op == "not":
        return 0.0 if _eval(node[1], env) != 0.0 else 1.0
    if op == "and":
        return 1.0 if _eval(node[1], env) != 0.0 and _eval(node[2], env) != 0.0 else 0.0
    if op == "or":
        return 1.0 if _eval(node[1], env) != 0.0 or _eval(node[2], env) != 0.0 else 0.0
    if op == "cmp":
        a, b = _eval(node[2], env), _eval(node[3], env)
        ok = {
            "<": a < b, "<=": a <= b, ">": a > b,
            ">=": a >= b, "==": a == b, "!=": a != b,
        }[node[1]]
        return 1.0 if ok else 0.0
    if op == "bin":
        a, b = _eval(node[2], env), _eval(node[3], env)
        if node[1] == "+":
            return a + b
        if node[1] == "-":
            return a - b
        if node[1] == "*":
            return a * b
        if b == 0.0:
            raise ExprEvalError("division by zero")
        return a / b
    if op == "call":
        args = [_eval(a, env) for a in node[2]]
        fname = node[1]
        if fname == "min":
            return min(args)
        if fname == "max":
            return max(args)
        if fname == "abs":
            return abs(args[0])
        if fname == "clamp":
            x, lo, hi = args
            return min(max(x, lo), hi)
        # k_of(k, flags...): 1.0 iff at least k of the flags are truthy
        k = args[0]
        return 1.0 if sum(1 for a in args[1:] if a != 0.0) >= k else 0.0
    raise AssertionError(f"unhandled node {op}")


def _names(node: tuple, out: set[str]) -> None:
    op = node[0]
    if op == "ref":
        out.add(node[1])
    elif op in ("neg", "not"):
        _names(node[1], out)
    elif op in ("and", "or"):
        _names(node[1], out)
        _names(node[2], out)
    elif op in ("cmp", "bin"):
        _names(node[2], out)
        _names(node[3], out)
    elif op == "call":
        for a in node[2]:
            _names(a, out)


@dataclass(frozen=True)
class Expr:
    """A parsed expression: evaluate against a name → value environment."""

    text: str
    _root: tuple

    @property
    def names(self) -> frozenset[str]:
        out: set[str] = set()
        _names(self._root, out)
        return frozenset(out)

    def evaluate(self, env: Mapping[str, Any]) -> float:
        value = _eval(self._root, env)
        if not math.isfinite(value):
            raise ExprEvalError(f"{self.text!r} evaluated to a non-finite value")
        return value

    def is_true(self, env: Mapping[str, Any]) -> bool:
        return self.evaluate(env) != 0.0


def parse(text: str) -> Expr:
    """Parse expression text; raises ExprSyntaxError on malformed input."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression")
    return Expr(text, _Parser(text).parse())
