"""Propositional formula language.

Grammar, loosest to tightest binding:

    impl  := seq ('=>' impl)?          right-associative
    seq   := unary ('.' unary)*        left-associative
    unary := 'not' unary | ATOM | '(' impl ')'

`.` is sequencing (read as conjunction under any truth-functional
interpretation), `=>` is implication, `not` (or `¬`) is negation.
Serialization emits minimal parentheses and round-trips: for every
formula f, parse(serialize(f)) == f.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError

__all__ = [
    "Formula",
    "Atom",
    "Not",
    "Seq",
    "Implies",
    "SourceSpan",
    "parse_formula",
    "serialize_formula",
    "atoms",
]


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Not:
    inner: "Formula"


@dataclass(frozen=True)
class Seq:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    antecedent: "Formula"
    consequent: "Formula"


Formula = Atom | Not | Seq | Implies


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int


# Shared by the structure-literal parser in structures.py.
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<neg>¬)
  | (?P<implies>=>)
  | (?P<dot>\.)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<lbrace>\{)
  | (?P<rbrace>\})
  | (?P<pipe>\|)
  | (?P<comma>,)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan


def tokenize(text: str) -> list[Token]:
    """Lex formula/structure source into tokens; trailing END token included."""
    out: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, pos + 1)
        kind = m.lastgroup
        assert kind is not None
        pos = m.end()
        if kind == "ws":
            continue
        value = m.group()
        if kind == "name":
            kind = "not" if value == "not" else "atom"
        elif kind == "neg":
            kind = "not"
        out.append(Token(kind, value, SourceSpan(m.start(), m.end())))
    out.append(Token("end", "", SourceSpan(len(text), len(text))))
    return out


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def take(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            got = tok.text or "end of input"
            raise ParseError(f"expected {what}, got {got!r}", tok.span.start, tok.span.end)
        return self.take()


def parse_formula(text: str) -> Formula:
    cur = _Cursor(tokenize(text))
    node = _parse_impl(cur)
    tok = cur.peek()
    if tok.kind != "end":
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.span.start, tok.span.end)
    return node


def _parse_impl(cur: _Cursor) -> Formula:
    left = _parse_seq(cur)
    if cur.peek().kind == "implies":
        cur.take()
        return Implies(left, _parse_impl(cur))
    return left


def _parse_seq(cur: _Cursor) -> Formula:
    node = _parse_unary(cur)
    while cur.peek().kind == "dot":
        cur.take()
        node = Seq(node, _parse_unary(cur))
    return node


def _parse_unary(cur: _Cursor) -> Formula:
    tok = cur.peek()
    if tok.kind == "not":
        cur.take()
        return Not(_parse_unary(cur))
    if tok.kind == "atom":
        cur.take()
        return Atom(tok.text)
    if tok.kind == "lparen":
        cur.take()
        node = _parse_impl(cur)
        cur.expect("rparen", "')'")
        return node
    got = tok.text or "end of input"
    raise ParseError(f"expected an atom, 'not', or '(', got {got!r}", tok.span.start, tok.span.end)


# Precedence levels for minimal-parenthesis printing.
_PREC_IMPL = 1
_PREC_SEQ = 2
_PREC_UNARY = 3


def serialize_formula(f: Formula) -> str:
    return _serialize(f, 0)


def _serialize(f: Formula, min_prec: int) -> str:
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        text = "not " + _serialize(f.inner, _PREC_UNARY)
        prec = _PREC_UNARY
    elif isinstance(f, Seq):
        # left-associative: right child needs strictly tighter binding
        text = _serialize(f.left, _PREC_SEQ) + " . " + _serialize(f.right, _PREC_SEQ + 1)
        prec = _PREC_SEQ
    else:
        # right-associative: left child needs strictly tighter binding
        text = _serialize(f.antecedent, _PREC_IMPL + 1) + " => " + _serialize(f.consequent, _PREC_IMPL)
        prec = _PREC_IMPL
    if prec < min_prec:
        return "(" + text + ")"
    return text


def atoms(f: Formula) -> frozenset[str]:
    """Set of atom names occurring in f."""
    if isinstance(f, Atom):
        return frozenset((f.name,))
    if isinstance(f, Not):
        return atoms(f.inner)
    if isinstance(f, Seq):
        return atoms(f.left) | atoms(f.right)
    return atoms(f.antecedent) | atoms(f.consequent)
