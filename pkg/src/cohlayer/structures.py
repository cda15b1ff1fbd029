"""Referent/condition structures and embedding-based satisfaction.

A Structure pairs a universe of discourse referents with a set of
conditions. Conditions are property ascriptions over referents, negations
of sub-structures, or implications between sub-structures. Satisfaction is
defined through embeddings: maps from referents of one structure into
another that preserve property ascriptions. A negation is satisfied when
no extending embedding satisfies the negated part; an implication is
satisfied when every embedding of the antecedent extends to one of the
consequent.

Text form: `{x, y | car(x), likes(x,y)}`. Nested conditions use
`not {. | .}` and `{. | .} => {. | .}`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Mapping

from .errors import CapExceededError, ParseError
from .formulas import _Cursor, tokenize

__all__ = [
    "Referent",
    "Atom",
    "Not",
    "Implies",
    "Condition",
    "Structure",
    "Embedding",
    "ScopedContext",
    "merge",
    "find_embedding",
    "check_satisfaction",
    "validate_structure",
    "parse_structure",
    "serialize_structure",
]

Referent = str

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class Atom:
    """Property ascription: predicate applied to declared referents."""

    predicate: str
    args: tuple[Referent, ...]


@dataclass(frozen=True)
class Not:
    inner: "Structure"


@dataclass(frozen=True)
class Implies:
    antecedent: "Structure"
    consequent: "Structure"


Condition = Atom | Not | Implies


@dataclass(frozen=True)
class Structure:
    universe: frozenset[Referent]
    conditions: frozenset[Condition]

    @classmethod
    def build(cls, universe: Iterable[Referent], conditions: Iterable[Condition] = ()) -> "Structure":
        return cls(frozenset(universe), frozenset(conditions))


@dataclass(frozen=True)
class Embedding:
    """Referent map found by the search; immutable, ordered by source id."""

    pairs: tuple[tuple[Referent, Referent], ...]

    @classmethod
    def from_mapping(cls, mapping: Mapping[Referent, Referent]) -> "Embedding":
        return cls(tuple(sorted(mapping.items())))

    def as_dict(self) -> dict[Referent, Referent]:
        return dict(self.pairs)

    def __getitem__(self, key: Referent) -> Referent:
        return self.as_dict()[key]


@dataclass(frozen=True)
class ScopedContext:
    """Context split into a presupposed part and the part negation targets."""

    presupposed: Structure
    scoped: Structure

    def whole(self) -> Structure:
        return merge(self.presupposed, self.scoped)

    def negated(self) -> Structure:
        """Presupposed part kept, scoped part wrapped in a negation condition."""
        return Structure(
            self.presupposed.universe,
            self.presupposed.conditions | {Not(self.scoped)},
        )


def merge(a: Structure, b: Structure) -> Structure:
    """Union of universes and conditions; shared ids denote the same referent."""
    return Structure(a.universe | b.universe, a.conditions | b.conditions)


def validate_structure(s: Structure, outer: frozenset[Referent] = frozenset()) -> None:
    """Check every ascription arg is declared in the enclosing universe chain."""
    problems: list[str] = []
    _validate(s, outer, problems)
    if problems:
        raise ValueError("; ".join(sorted(problems)))


def _validate(s: Structure, outer: frozenset[Referent], problems: list[str]) -> None:
    scope = outer | s.universe
    for cond in s.conditions:
        if isinstance(cond, Atom):
            for arg in cond.args:
                if arg not in scope:
                    problems.append(f"undeclared referent {arg!r} in {cond.predicate}")
        elif isinstance(cond, Not):
            _validate(cond.inner, scope, problems)
        else:
            _validate(cond.antecedent, scope, problems)
            # consequent may reuse referents the antecedent binds
            _validate(cond.consequent, scope | cond.antecedent.universe, problems)


def _extensions(
    ids: Iterable[Referent],
    target: Structure,
    base: dict[Referent, Referent],
    cap: int,
) -> Iterator[dict[Referent, Referent]]:
    """All maps extending base over the given ids, in lexicographic order."""
    free = sorted(set(ids) - base.keys())
    if not free:
        yield dict(base)
        return
    candidates = sorted(target.universe)
    if len(candidates) ** len(free) > cap:
        raise CapExceededError(
            f"{len(candidates)}^{len(free)} candidate maps exceed cap {cap}"
        )
    for combo in product(candidates, repeat=len(free)):
        ext = dict(base)
        ext.update(zip(free, combo))
        yield ext


def _satisfied(
    s: Structure,
    verifier: Structure,
    mapping: dict[Referent, Referent],
    cap: int,
) -> bool:
    for cond in s.conditions:
        if isinstance(cond, Atom):
            try:
                image = tuple(mapping[a] for a in cond.args)
            except KeyError as exc:
                raise ValueError(f"unbound referent {exc.args[0]!r}") from None
            if Atom(cond.predicate, image) not in verifier.conditions:
                return False
        elif isinstance(cond, Not):
            # satisfied only if no extension embeds the negated part
            for ext in _extensions(cond.inner.universe, verifier, mapping, cap):
                if _satisfied(cond.inner, verifier, ext, cap):
                    return False
        else:
            for g in _extensions(cond.antecedent.universe, verifier, mapping, cap):
                if not _satisfied(cond.antecedent, verifier, g, cap):
                    continue
                if not any(
                    _satisfied(cond.consequent, verifier, h, cap)
                    for h in _extensions(cond.consequent.universe, verifier, g, cap)
                ):
                    return False
    return True


def find_embedding(
    source: Structure, target: Structure, cap: int = DEFAULT_CAP
) -> Embedding | None:
    """First embedding of source into target under lexicographic map order.

    Returns None when no embedding exists. Raises CapExceededError when the
    candidate map space is larger than the cap.
    """
    validate_structure(source)
    validate_structure(target)
    for mapping in _extensions(source.universe, target, {}, cap):
        if _satisfied(source, target, mapping, cap):
            return Embedding.from_mapping(mapping)
    return None


def check_satisfaction(
    phi: Structure,
    verifier: Structure,
    base: Embedding | None = None,
    cap: int = DEFAULT_CAP,
) -> bool:
    """Does the verifier satisfy phi, extending the given partial map?

    Referents of phi not covered by base are bound existentially. With no
    base this coincides with find_embedding(phi, verifier) is not None.
    """
    validate_structure(phi)
    validate_structure(verifier)
    start = base.as_dict() if base is not None else {}
    return any(
        _satisfied(phi, verifier, ext, cap)
        for ext in _extensions(phi.universe, verifier, start, cap)
    )


# ---------------------------------------------------------------------------
# text form


def parse_structure(text: str) -> Structure:
    cur = _Cursor(tokenize(text))
    s = _parse_structure(cur)
    tok = cur.peek()
    if tok.kind != "end":
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.span.start, tok.span.end)
    validate_structure(s)
    return s


def _parse_structure(cur: _Cursor) -> Structure:
    cur.expect("lbrace", "'{'")
    universe: list[Referent] = []
    if cur.peek().kind == "atom":
        universe.append(cur.take().text)
        while cur.peek().kind == "comma":
            cur.take()
            universe.append(cur.expect("atom", "referent id").text)
    cur.expect("pipe", "'|'")
    conditions: list[Condition] = []
    if cur.peek().kind != "rbrace":
        conditions.append(_parse_condition(cur))
        while cur.peek().kind == "comma":
            cur.take()
            conditions.append(_parse_condition(cur))
    cur.expect("rbrace", "'}'")
    return Structure(frozenset(universe), frozenset(conditions))


def _parse_condition(cur: _Cursor) -> Condition:
    tok = cur.peek()
    if tok.kind == "not":
        cur.take()
        return Not(_parse_structure(cur))
    if tok.kind == "lbrace":
        antecedent = _parse_structure(cur)
        cur.expect("implies", "'=>'")
        return Implies(antecedent, _parse_structure(cur))
    if tok.kind == "atom":
        name = cur.take().text
        cur.expect("lparen", "'('")
        args: list[Referent] = []
        if cur.peek().kind == "atom":
            args.append(cur.take().text)
            while cur.peek().kind == "comma":
                cur.take()
                args.append(cur.expect("atom", "referent id").text)
        cur.expect("rparen", "')'")
        return Atom(name, tuple(args))
    got = tok.text or "end of input"
    raise ParseError(f"expected a condition, got {got!r}", tok.span.start, tok.span.end)


def serialize_structure(s: Structure) -> str:
    ids = ", ".join(sorted(s.universe))
    conds = ", ".join(sorted(_serialize_condition(c) for c in s.conditions))
    return "{" + ids + " | " + conds + "}"


def _serialize_condition(c: Condition) -> str:
    if isinstance(c, Atom):
        return f"{c.predicate}({','.join(c.args)})"
    if isinstance(c, Not):
        return "not " + serialize_structure(c.inner)
    return serialize_structure(c.antecedent) + " => " + serialize_structure(c.consequent)
