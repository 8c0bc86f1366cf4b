"""Closed expression grammar shared by the knowledge base and the decision engine.

The grammar is deliberately small and executes no user code:

    expr       := or_expr
    or_expr    := and_expr ("or" and_expr)*
    and_expr   := not_expr ("and" not_expr)*
    not_expr   := "not" not_expr | comparison
    comparison := arith (("<" | "<=" | ">" | ">=" | "==" | "!=") arith)?
    arith      := term (("+" | "-") term)*
    term       := unary (("*" | "/") unary)*
    unary      := "-" unary | atom
    atom       := NUMBER | "true" | "false" | IDENT
                | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

Built-in functions: ``min(a, b)``, ``max(a, b)``, ``safe_div(a, b, default)``,
``defined(x)``.

Missing-value policy (total evaluation):

* an identifier absent from the environment evaluates to :data:`MISSING`;
* arithmetic with a MISSING operand is MISSING; bare ``/`` by zero is MISSING;
* any comparison involving MISSING is ``False``;
* in boolean context (``and`` / ``or`` / ``not`` / predicate results) MISSING
  coerces to ``False``;
* ``safe_div`` returns its default on a zero denominator but still propagates
  MISSING inputs;
* ``defined(x)`` is ``True`` iff ``x`` is present, letting authors branch
  explicitly instead of relying on the coercions above.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import EvaluationFault, ExpressionSyntaxError


class _Missing:
    """Sentinel for absent evidence values."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MISSING"


MISSING = _Missing()

Value = Union[float, int, bool, str]

_FUNCTIONS = {"min": 2, "max": 2, "safe_div": 3, "defined": 1}
_KEYWORDS = {"and", "or", "not", "true", "false"}


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: Value


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "not"
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / < <= > >= == != and or
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Node = Union[Literal, Name, Unary, Binary, Call]

_COMPARISONS = {"<", "<=", ">", ">=", "==", "!="}
_ARITH = {"+", "-", "*", "/"}


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|==|!=|<|>|\+|-|\*|/|\(|\)|,)"
    r")"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            rest = text[pos:].lstrip()
            if not rest:
                break
            at = pos + (len(text) - pos - len(rest))
            raise ExpressionSyntaxError(text, at, f"unexpected character {rest[0]!r}")
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


# --- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self):
        return self.tokens[self.index]

    def advance(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect_op(self, op: str):
        kind, value, pos = self.peek()
        if kind != "op" or value != op:
            raise ExpressionSyntaxError(self.text, pos, f"expected {op!r}")
        return self.advance()

    def fail(self, detail: str):
        _, _, pos = self.peek()
        raise ExpressionSyntaxError(self.text, pos, detail)

    def parse(self) -> Node:
        node = self.or_expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(self.text, pos, f"trailing input at {value!r}")
        return node

    def or_expr(self) -> Node:
        node = self.and_expr()
        while self._at_keyword("or"):
            self.advance()
            node = Binary("or", node, self.and_expr())
        return node

    def and_expr(self) -> Node:
        node = self.not_expr()
        while self._at_keyword("and"):
            self.advance()
            node = Binary("and", node, self.not_expr())
        return node

    def not_expr(self) -> Node:
        if self._at_keyword("not"):
            self.advance()
            return Unary("not", self.not_expr())
        return self.comparison()

    def comparison(self) -> Node:
        node = self.arith()
        kind, value, _ = self.peek()
        if kind == "op" and value in _COMPARISONS:
            self.advance()
            node = Binary(value, node, self.arith())
        return node

    def arith(self) -> Node:
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in {"+", "-"}:
                self.advance()
                node = Binary(value, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in {"*", "/"}:
                self.advance()
                node = Binary(value, node, self.unary())
            else:
                return node

    def unary(self) -> Node:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Unary("-", self.unary())
        return self.atom()

    def atom(self) -> Node:
        kind, value, pos = self.advance()
        if kind == "number":
            return Literal(float(value))
        if kind == "ident":
            if value == "true":
                return Literal(True)
            if value == "false":
                return Literal(False)
            if value in _KEYWORDS:
                raise ExpressionSyntaxError(self.text, pos, f"misplaced keyword {value!r}")
            next_kind, next_value, _ = self.peek()
            if next_kind == "op" and next_value == "(":
                return self.call(value, pos)
            return Name(value)
        if kind == "op" and value == "(":
            node = self.or_expr()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError(self.text, pos, f"unexpected token {value!r}")

    def call(self, func: str, pos: int) -> Node:
        if func not in _FUNCTIONS:
            raise ExpressionSyntaxError(self.text, pos, f"unknown function {func!r}")
        self.expect_op("(")
        args = [self.or_expr()]
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == ",":
                self.advance()
                args.append(self.or_expr())
            else:
                break
        self.expect_op(")")
        if len(args) != _FUNCTIONS[func]:
            raise ExpressionSyntaxError(
                self.text, pos, f"{func} takes {_FUNCTIONS[func]} arguments, got {len(args)}"
            )
        if func == "defined" and not isinstance(args[0], Name):
            raise ExpressionSyntaxError(self.text, pos, "defined() takes a bare identifier")
        return Call(func, tuple(args))

    def _at_keyword(self, word: str) -> bool:
        kind, value, _ = self.peek()
        return kind == "ident" and value == word


def parse(text: str) -> Node:
    """Parse an expression string into its tree form."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionSyntaxError(str(text), 0, "empty expression")
    return _Parser(text).parse()


def referenced_identifiers(node: Node) -> set:
    """All identifiers an expression reads (including arguments of defined())."""
    out: set = set()
    _collect(node, out)
    return out


def _collect(node: Node, out: set) -> None:
    if isinstance(node, Name):
        out.add(node.ident)
    elif isinstance(node, Unary):
        _collect(node.operand, out)
    elif isinstance(node, Binary):
        _collect(node.left, out)
        _collect(node.right, out)
    elif isinstance(node, Call):
        for arg in node.args:
            _collect(arg, out)


# --- evaluator -------------------------------------------------------------


def _as_bool(value) -> bool:
    if value is MISSING:
        return False
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return value != 0
    if isinstance(value, str):
        return bool(value)
    raise EvaluationFault(f"value {value!r} has no boolean reading")


def _numeric(value):
    """Numeric view of a value, or MISSING when it has none."""
    if value is MISSING:
        return MISSING
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, (int, float)):
        return float(value)
    return MISSING  # labels have no numeric reading


def evaluate(node: Node, env: Mapping[str, Value]):
    """Evaluate a parsed expression against an evidence environment.

    Returns a float, bool, str, or :data:`MISSING`; never raises on missing
    or type-mismatched evidence (the policy makes every expression total).
    """
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Name):
        value = env.get(node.ident, MISSING)
        return MISSING if value is None else value
    if isinstance(node, Unary):
        if node.op == "not":
            return not _as_bool(evaluate(node.operand, env))
        operand = _numeric(evaluate(node.operand, env))
        return MISSING if operand is MISSING else -operand
    if isinstance(node, Binary):
        return _binary(node, env)
    if isinstance(node, Call):
        return _call(node, env)
    raise EvaluationFault(f"unknown node type {type(node).__name__}")


def _binary(node: Binary, env):
    if node.op == "and":
        if not _as_bool(evaluate(node.left, env)):
            return False
        return _as_bool(evaluate(node.right, env))
    if node.op == "or":
        if _as_bool(evaluate(node.left, env)):
            return True
        return _as_bool(evaluate(node.right, env))

    left = evaluate(node.left, env)
    right = evaluate(node.right, env)

    if node.op in _COMPARISONS:
        return _compare(node.op, left, right)

    left = _numeric(left)
    right = _numeric(right)
    if left is MISSING or right is MISSING:
        return MISSING
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if right == 0:
            return MISSING  # only safe_div may absorb a zero denominator
        return left / right
    raise EvaluationFault(f"unknown operator {node.op!r}")


def _compare(op: str, left, right) -> bool:
    # Comparisons are total: MISSING or incomparable operands yield False,
    # except != which is the negation of a well-defined equality.
    if left is MISSING or right is MISSING:
        return False
    if isinstance(left, str) or isinstance(right, str):
        if not (isinstance(left, str) and isinstance(right, str)):
            return op == "!="
        if op == "==":
            return left == right
        if op == "!=":
            return left != right
        return False  # no ordering on labels
    lnum, rnum = _numeric(left), _numeric(right)
    if op == "<":
        return lnum < rnum
    if op == "<=":
        return lnum <= rnum
    if op == ">":
        return lnum > rnum
    if op == ">=":
        return lnum >= rnum
    if op == "==":
        return lnum == rnum
    return lnum != rnum


def _call(node: Call, env):
    if node.func == "defined":
        ident = node.args[0].ident
        return ident in env and env[ident] is not None and env[ident] is not MISSING
    if node.func == "safe_div":
        a = _numeric(evaluate(node.args[0], env))
        b = _numeric(evaluate(node.args[1], env))
        if a is MISSING or b is MISSING:
            return MISSING
        if b == 0:
            return _numeric(evaluate(node.args[2], env))
        return a / b
    a = _numeric(evaluate(node.args[0], env))
    b = _numeric(evaluate(node.args[1], env))
    if a is MISSING or b is MISSING:
        return MISSING
    return min(a, b) if node.func == "min" else max(a, b)


def evaluate_predicate(node: Node, env: Mapping[str, Value]) -> bool:
    """Evaluate an expression in boolean context (predicates, gates, vetoes)."""
    return _as_bool(evaluate(node, env))
