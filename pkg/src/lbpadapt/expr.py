"""Small expression language for birth, competition and mutation rates.

Grammar (infix, standard precedence, ``^`` is right-associative power):

    expr   := term  (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | VARIABLE | FUNC "(" expr ")" | "(" expr ")"

Variables are ``x1..xk`` (resident trait) and ``y1..yk`` (mutant trait);
the only functions are ``exp`` and ``log``.  Parsing reports the column of
the offending token on error.  A parsed expression is compiled once into a
plain Python function of two coordinate tuples, so repeated evaluation
(inside event loops) is cheap.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import ExpressionError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

_FUNCTIONS = {"exp": "math.exp", "log": "math.log"}


@dataclass
class _Token:
    kind: str  # 'num' | 'ident' | 'op' | 'end'
    text: str
    pos: int


def _tokenize(text):
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        m = _TOKEN_RE.match(text, i)
        if m is None:
            # skip over trailing whitespace before declaring failure
            if text[i:].strip() == "":
                break
            bad = len(text) - len(text[i:].lstrip())
            raise ExpressionError(f"unexpected character {text[bad]!r}", bad)
        pos = m.start(m.lastgroup)
        tokens.append(_Token(m.lastgroup, m.group(m.lastgroup), pos))
        i = m.end()
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    """Recursive-descent parser producing a Python source fragment."""

    def __init__(self, text, x_dim, y_dim):
        self.text = text
        self.tokens = _tokenize(text)
        self.k = 0
        self.x_dim = x_dim
        self.y_dim = y_dim
        self.uses_y = False

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_op(self, op):
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise ExpressionError(f"expected {op!r}", tok.pos)
        return self.advance()

    def parse(self):
        code = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected token {tok.text!r}", tok.pos)
        return code

    def expr(self):
        code = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            code = f"({code} {op} {self.term()})"
        return code

    def term(self):
        code = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            code = f"({code} {op} {self.unary()})"
        return code

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return f"(-{self.unary()})"
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            return f"({base} ** {self.unary()})"
        return base

    def atom(self):
        tok = self.advance()
        if tok.kind == "num":
            return repr(float(tok.text))
        if tok.kind == "ident":
            if tok.text in _FUNCTIONS:
                self.expect_op("(")
                inner = self.expr()
                closing = self.peek()
                if closing.kind != "op" or closing.text != ")":
                    raise ExpressionError("unclosed parenthesis", closing.pos)
                self.advance()
                return f"{_FUNCTIONS[tok.text]}({inner})"
            return self.variable(tok)
        if tok.kind == "op" and tok.text == "(":
            inner = self.expr()
            closing = self.peek()
            if closing.kind != "op" or closing.text != ")":
                raise ExpressionError("unclosed parenthesis", closing.pos)
            self.advance()
            return f"({inner})"
        if tok.kind == "end":
            raise ExpressionError("unexpected end of expression", tok.pos)
        raise ExpressionError(f"unexpected token {tok.text!r}", tok.pos)

    def variable(self, tok):
        m = re.fullmatch(r"([xy])([1-9]\d*)", tok.text)
        if m is None:
            raise ExpressionError(f"unknown identifier {tok.text!r}", tok.pos)
        slot, idx = m.group(1), int(m.group(2))
        dim = self.x_dim if slot == "x" else self.y_dim
        if dim == 0:
            raise ExpressionError(
                f"variable {tok.text!r} not allowed in this expression", tok.pos
            )
        if idx > dim:
            raise ExpressionError(
                f"variable {tok.text!r} exceeds trait dimension k={dim}", tok.pos
            )
        self.uses_y = self.uses_y or slot == "y"
        return f"{slot}[{idx - 1}]"


class RateExpression:
    """A compiled rate expression.

    ``x_dim`` coordinates of the resident are always available; mutant
    coordinates ``y1..`` are only legal when ``allow_y`` was set (the
    competition kernel c(x, y)).  Calling evaluates to a float and raises
    :class:`ModelError` on a non-finite result.
    """

    def __init__(self, text, k, allow_y=False):
        self.text = text
        self.k = k
        self.allow_y = allow_y
        parser = _Parser(text, x_dim=k, y_dim=k if allow_y else 0)
        self._code = parser.parse()
        self.uses_y = parser.uses_y
        src = f"lambda x, y: {self._code}"
        self._fn = eval(src, {"math": math})  # AST-controlled codegen, no user text

    def __call__(self, x, y=None):
        from .errors import ModelError

        try:
            val = self._fn(x, y)
        except (ArithmeticError, ValueError) as exc:
            raise ModelError(
                f"expression {self.text!r} failed at x={tuple(x)}"
                + (f", y={tuple(y)}" if y is not None else "")
                + f": {exc}"
            ) from exc
        if not math.isfinite(val):
            raise ModelError(
                f"expression {self.text!r} evaluated to non-finite value {val}"
            )
        return val

    def __repr__(self):
        return f"RateExpression({self.text!r}, k={self.k})"


def parse_expression(text, k, allow_y=False):
    """Parse ``text`` into a :class:`RateExpression` over k trait coordinates."""
    return RateExpression(text, k, allow_y=allow_y)
