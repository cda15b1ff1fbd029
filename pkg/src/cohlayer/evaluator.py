"""Operator-aware probability evaluation over a base measure.

The base measure answers exactly one kind of question: the probability of
a single atom given a tuple of positive atoms already in force. Everything
else (negation, sequencing, implication, compound contexts) is computed
here, so the base is never asked about a negated or compound sentence.

Evaluation of a formula f against a context proceeds by cases, after a
propositional closure check that settles f whenever the context entails f
(result 1) or entails its negation (result 0):

- not f        -> 1 - eval(f); a doubled negation is collapsed
                  structurally first, so eval(not not f) == eval(f)
                  exactly in floats.
- f . g        -> eval(f) * eval(g | context extended with f), the chain
                  rule read left to right. A zero prefix short-circuits
                  to 0, so nothing is ever conditioned on mass the
                  measure does not have.
- f => g       -> 1 - eval(f . not g), the complement of the exception.
- atom         -> if the context is a list of literals, positive atoms
                  are passed straight to the base and negated atoms are
                  peeled rightmost-first through the complement identity
                  p(a | not k) = p(a) * (1 - p(k | a)) / (1 - p(k)),
                  with the marginals taken against the remaining context.
                  Compound context items are handled exactly: enumerate
                  truth assignments over the context atoms, obtain each
                  assignment's mass by inclusion-exclusion over
                  positive-conjunction chain queries, and condition by
                  ratio.

For a base induced by any coherent measure both atom paths agree with the
measure's true conditional, and the evaluator reproduces it for every
formula. For incoherent bases the identities involving negation are still
enforced by construction; `on_incoherent` picks between raising and
clamping when the arithmetic leaves [0, 1].

The truth-table closure bounds context size: at most 16 distinct atoms
per evaluation (12 when compound context items force the assignment
enumeration).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import (
    ContextBoundError,
    DivisionByCertaintyError,
    IncoherentBaseError,
    MeasureZeroError,
)
from .formulas import Atom, Formula, Implies, Not, Seq, atoms, parse_formula, serialize_formula

__all__ = [
    "BaseMeasure",
    "TableBaseMeasure",
    "HashBaseMeasure",
    "EvalContext",
    "Evaluator",
    "evaluate",
    "cond_on_negated",
    "check_admissibility",
    "AdmissibilityReport",
]

MAX_ATOMS = 16
# inclusion-exclusion over assignments costs 3^n conjunction lookups
MAX_PROP_ATOMS = 12

_TOL = 1e-12


class BaseMeasure(Protocol):
    def prob(self, atom: str, context: tuple[str, ...]) -> float:
        """Probability of `atom` given the positive atoms in `context`."""
        ...


class TableBaseMeasure:
    """Base measure backed by an explicit (atom, context) table."""

    def __init__(
        self,
        table: Mapping[tuple[str, tuple[str, ...]], float],
        default: float | None = None,
    ):
        self._table = dict(table)
        self._default = default

    def prob(self, atom: str, context: tuple[str, ...]) -> float:
        key = (atom, tuple(context))
        if key in self._table:
            return self._table[key]
        if self._default is None:
            raise KeyError(f"no entry for {key!r}")
        return self._default


class HashBaseMeasure:
    """Deterministic pseudo-random base measure, values strictly inside (0, 1).

    Generally incoherent; useful for stress tests. Never returns 0 or 1,
    so division by certainty cannot arise.
    """

    def __init__(self, seed: int = 0):
        self._seed = seed

    def prob(self, atom: str, context: tuple[str, ...]) -> float:
        key = f"{self._seed}|{atom}|{'|'.join(context)}"
        digest = hashlib.sha256(key.encode()).digest()
        n = int.from_bytes(digest[:8], "big")
        return (n % 9973 + 1) / 9975.0


@dataclass(frozen=True)
class EvalContext:
    """Ordered tuple of formulas taken as given, left to right."""

    formulas: tuple[Formula, ...] = ()

    @classmethod
    def of(cls, items: Iterable[Formula | str]) -> "EvalContext":
        parsed = tuple(parse_formula(x) if isinstance(x, str) else x for x in items)
        return cls(parsed)


def cond_on_negated(p_a3: float, p_k_given_a3: float, p_k: float) -> float:
    """Probability of a continuation given the negation of an alternative.

    Bayes on the complement: p(a3 | not k) = p(a3) (1 - p(k | a3)) / (1 - p(k)).
    Inputs must lie in [0, 1]. Raises DivisionByCertaintyError when p_k = 1
    and IncoherentBaseError when the inputs could not have come from one
    measure (result above 1).
    """
    for name, v in (("p_a3", p_a3), ("p_k_given_a3", p_k_given_a3), ("p_k", p_k)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")
    if p_k >= 1.0:
        raise DivisionByCertaintyError("conditioning on the negation of a certainty")
    val = p_a3 * (1.0 - p_k_given_a3) / (1.0 - p_k)
    if val > 1.0 + _TOL:
        raise IncoherentBaseError(
            f"complement conditioning left [0, 1]: {val} from "
            f"({p_a3}, {p_k_given_a3}, {p_k})"
        )
    return min(val, 1.0)


def _strip_double_neg(f: Formula) -> Formula:
    while isinstance(f, Not) and isinstance(f.inner, Not):
        f = f.inner.inner
    return f


class Evaluator:
    """Evaluates formulas against contexts over one base measure.

    on_incoherent: 'raise' propagates incoherence as errors, 'clamp' keeps
    every intermediate value inside [0, 1] and treats mass-zero
    conditioning as 0. Errors raised by the base itself always propagate.
    """

    def __init__(self, base: BaseMeasure, *, on_incoherent: str = "raise", max_atoms: int = MAX_ATOMS):
        if on_incoherent not in ("raise", "clamp"):
            raise ValueError(f"on_incoherent must be 'raise' or 'clamp', got {on_incoherent!r}")
        self._base = base
        self._strict = on_incoherent == "raise"
        self._max_atoms = max_atoms
        self._mask_cache: dict[tuple[tuple[str, ...], Formula], int] = {}
        self._var_cache: dict[tuple[str, ...], list[int]] = {}
        self._conj_cache: dict[tuple[str, ...], float] = {}

    def evaluate(self, formula: Formula | str, context: EvalContext | Sequence[Formula | str] = ()) -> float:
        f = parse_formula(formula) if isinstance(formula, str) else formula
        ctx = context if isinstance(context, EvalContext) else EvalContext.of(context)
        names = set(atoms(f))
        for item in ctx.formulas:
            names |= atoms(item)
        if len(names) > self._max_atoms:
            raise ContextBoundError(
                f"{len(names)} atoms in formula plus context, budget is {self._max_atoms}"
            )
        return self._eval(f, ctx.formulas, tuple(sorted(names)))

    # -- truth-table machinery over a fixed atom universe

    def _vars(self, universe: tuple[str, ...]) -> list[int]:
        cached = self._var_cache.get(universe)
        if cached is None:
            n = len(universe)
            total = 1 << n
            cached = []
            for j in range(n):
                period = 1 << (j + 1)
                rep = ((1 << total) - 1) // ((1 << period) - 1)
                block = ((1 << (1 << j)) - 1) << (1 << j)
                cached.append(rep * block)
            self._var_cache[universe] = cached
        return cached

    def _mask(self, f: Formula, universe: tuple[str, ...]) -> int:
        key = (universe, f)
        cached = self._mask_cache.get(key)
        if cached is not None:
            return cached
        full = (1 << (1 << len(universe))) - 1
        if isinstance(f, Atom):
            m = self._vars(universe)[universe.index(f.name)]
        elif isinstance(f, Not):
            m = full ^ self._mask(f.inner, universe)
        elif isinstance(f, Seq):
            m = self._mask(f.left, universe) & self._mask(f.right, universe)
        else:
            m = (full ^ self._mask(f.antecedent, universe)) | self._mask(f.consequent, universe)
        self._mask_cache[key] = m
        return m

    def _eval(self, f: Formula, ctx: tuple[Formula, ...], universe: tuple[str, ...]) -> float:
        full = (1 << (1 << len(universe))) - 1
        m_ctx = full
        for item in ctx:
            m_ctx &= self._mask(item, universe)
        m_f = self._mask(f, universe)
        if m_ctx & (full ^ m_f) == 0:
            return 1.0
        if m_ctx & m_f == 0:
            return 0.0
        if isinstance(f, Atom):
            return self._atom_prob(f.name, ctx)
        if isinstance(f, Not):
            if isinstance(f.inner, Not):
                return self._eval(f.inner.inner, ctx, universe)
            return 1.0 - self._eval(f.inner, ctx, universe)
        if isinstance(f, Seq):
            p_left = self._eval(f.left, ctx, universe)
            if p_left == 0.0:
                return 0.0
            return p_left * self._eval(f.right, ctx + (f.left,), universe)
        return 1.0 - self._eval(Seq(f.antecedent, Not(f.consequent)), ctx, universe)

    # -- atom queries

    def _atom_prob(self, name: str, ctx: tuple[Formula, ...]) -> float:
        pos: list[str] = []
        neg: list[str] = []
        compound = False
        for raw in ctx:
            item = _strip_double_neg(raw)
            if isinstance(item, Atom):
                if item.name not in pos:
                    pos.append(item.name)
            elif isinstance(item, Not) and isinstance(item.inner, Atom):
                if item.inner.name not in neg:
                    neg.append(item.inner.name)
            else:
                compound = True
                break
        if compound:
            return self._prop_conditional(name, ctx)
        return self._literal_conditional(name, tuple(pos), tuple(neg))

    def _base_query(self, atom: str, context: tuple[str, ...]) -> float:
        v = float(self._base.prob(atom, context))
        if not 0.0 <= v <= 1.0:
            raise IncoherentBaseError(f"base returned {v} for {atom!r} given {context!r}")
        return v

    def _literal_conditional(self, a: str, pos: tuple[str, ...], neg: tuple[str, ...]) -> float:
        if not neg:
            return self._base_query(a, pos)
        k = neg[-1]
        rest = neg[:-1]
        p_a = self._literal_conditional(a, pos, rest)
        p_k = self._literal_conditional(k, pos, rest)
        # a zero continuation is settled; querying (pos, a) would condition
        # the base on a zero-mass conjunction
        p_k_a = 0.0 if p_a == 0.0 else self._literal_conditional(k, pos + (a,), rest)
        if self._strict:
            return cond_on_negated(p_a, p_k_a, p_k)
        if p_k >= 1.0:
            return 0.0
        val = p_a * (1.0 - p_k_a) / (1.0 - p_k)
        return min(max(val, 0.0), 1.0)

    def _conj_mass(self, names: tuple[str, ...]) -> float:
        """Mass of a positive conjunction via the chain rule, zero short-circuits."""
        cached = self._conj_cache.get(names)
        if cached is not None:
            return cached
        p = 1.0
        prefix: list[str] = []
        for s in names:
            q = self._base_query(s, tuple(prefix))
            p *= q
            if p == 0.0:
                break
            prefix.append(s)
        self._conj_cache[names] = p
        return p

    def _assignment_mass(self, ones: tuple[str, ...], zeros: tuple[str, ...]) -> float:
        total = 0.0
        for t in range(1 << len(zeros)):
            chosen = tuple(zeros[j] for j in range(len(zeros)) if (t >> j) & 1)
            sign = -1.0 if bin(t).count("1") % 2 else 1.0
            total += sign * self._conj_mass(tuple(sorted(ones + chosen)))
        if total < 0.0:
            if self._strict and total < -_TOL:
                raise IncoherentBaseError(
                    f"negative mass {total} for assignment {ones}+/{zeros}-"
                )
            total = 0.0
        return total

    def _prop_conditional(self, a: str, ctx: tuple[Formula, ...]) -> float:
        names_set = {a}
        for item in ctx:
            names_set |= atoms(item)
        names = tuple(sorted(names_set))
        n = len(names)
        if n > MAX_PROP_ATOMS:
            raise ContextBoundError(
                f"{n} atoms in a compound context, assignment enumeration capped at {MAX_PROP_ATOMS}"
            )
        full = (1 << (1 << n)) - 1
        m_ctx = full
        for item in ctx:
            m_ctx &= self._mask(item, names)
        a_bit = names.index(a)
        num = 0.0
        den = 0.0
        for i in range(1 << n):
            if not (m_ctx >> i) & 1:
                continue
            ones = tuple(names[j] for j in range(n) if (i >> j) & 1)
            zeros = tuple(names[j] for j in range(n) if not (i >> j) & 1)
            m = self._assignment_mass(ones, zeros)
            den += m
            if (i >> a_bit) & 1:
                num += m
        if den <= 0.0:
            if self._strict:
                raise MeasureZeroError(
                    f"compound context {[serialize_formula(c) for c in ctx]} has zero mass"
                )
            return 0.0
        return min(num / den, 1.0)


def evaluate(
    formula: Formula | str,
    context: EvalContext | Sequence[Formula | str] = (),
    *,
    base: BaseMeasure,
    on_incoherent: str = "raise",
) -> float:
    """One-shot evaluation; builds a throwaway Evaluator."""
    return Evaluator(base, on_incoherent=on_incoherent).evaluate(formula, context)


def _seq_spine(f: Formula) -> list[Formula]:
    parts: list[Formula] = []
    while isinstance(f, Seq):
        parts.append(f.right)
        f = f.left
    parts.append(f)
    parts.reverse()
    return parts


def _fold_seq(head: Formula, rest: Sequence[Formula]) -> Formula:
    out = head
    for item in rest:
        out = Seq(out, item)
    return out


@dataclass(frozen=True)
class AdmissibilityReport:
    gamma: float
    monotone_ok: bool
    monotone_witness: dict | None
    conj_elim_ok: bool
    conj_elim_witness: dict | None
    checked_pairs: int

    @property
    def ok(self) -> bool:
        return self.monotone_ok and self.conj_elim_ok


def check_admissibility(
    a1: Formula | str,
    a2: Formula | str,
    contexts: Sequence[EvalContext | Sequence[Formula | str]],
    base: BaseMeasure,
    *,
    tol: float = 1e-9,
    on_incoherent: str = "raise",
) -> AdmissibilityReport:
    """Audit the two operator laws tying a continuation to its extension.

    a1 must be a sequencing prefix of a2. Where the extension is certain
    given the prefix (eval(a2 | a1) = 1), monotonicity demands
    eval(a2 | C) >= eval(a1 | C) in every supplied context; those
    comparisons are what checked_pairs counts. Independently, granting a2
    must make the prefix plus any of a2's remaining parts certain:
    eval(a1 . part | a2) = 1 including the empty part. Reports witnesses
    instead of raising.
    """
    f1 = parse_formula(a1) if isinstance(a1, str) else a1
    f2 = parse_formula(a2) if isinstance(a2, str) else a2
    spine1 = _seq_spine(f1)
    spine2 = _seq_spine(f2)
    if spine2[: len(spine1)] != spine1:
        raise ValueError("a1 is not a sequencing prefix of a2")
    rest = spine2[len(spine1):]

    ev = Evaluator(base, on_incoherent=on_incoherent)
    gamma = ev.evaluate(f2, (f1,))

    monotone_ok = True
    monotone_witness: dict | None = None
    checked_pairs = 0
    if abs(gamma - 1.0) <= tol:
        for raw in contexts:
            ctx = raw if isinstance(raw, EvalContext) else EvalContext.of(raw)
            v2 = ev.evaluate(f2, ctx)
            v1 = ev.evaluate(f1, ctx)
            checked_pairs += 1
            if v2 < v1 - tol and monotone_witness is None:
                monotone_ok = False
                monotone_witness = {
                    "context": [serialize_formula(c) for c in ctx.formulas],
                    "prefix_value": v1,
                    "extension_value": v2,
                }

    # the empty continuation, each remaining part, and each cumulative run
    parts: list[tuple[Formula, ...]] = [()]
    parts.extend((p,) for p in rest)
    for i in range(2, len(rest) + 1):
        parts.append(tuple(rest[:i]))
    seen: set[Formula] = set()
    conj_ok = True
    conj_witness: dict | None = None
    for part in parts:
        candidate = _fold_seq(f1, part)
        if candidate in seen:
            continue
        seen.add(candidate)
        v = ev.evaluate(candidate, (f2,))
        if abs(v - 1.0) > tol and conj_witness is None:
            conj_ok = False
            conj_witness = {"part": serialize_formula(candidate), "value": v}

    return AdmissibilityReport(
        gamma=gamma,
        monotone_ok=monotone_ok,
        monotone_witness=monotone_witness,
        conj_elim_ok=conj_ok,
        conj_elim_witness=conj_witness,
        checked_pairs=checked_pairs,
    )
