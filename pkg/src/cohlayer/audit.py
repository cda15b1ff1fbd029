"""Incoherence auditing for string-indexed probability assignments.

A StringDist file records what a model assigned to a set of strings,
plus side information naming which strings are complements of each
other, which are equivalent, and which are tautologies:

    0.25<TAB>it is raining
    0<TAB>it is not raining
    #pairs
    it is raining<TAB>it is not raining
    #equiv
    A<TAB>B
    #taut
    it is raining or it is not raining

The audit measures how far the assignment is from every coherent
measure: complement pairs should sum to 1, tautologies should get 1,
equivalent strings should agree. Any gap beyond epsilon means no
coherent measure could have produced the numbers, and the margin of a
complement pair is exactly the guaranteed profit of the corresponding
book of bets.

WorldModel is the reference implementation of a coherent assignment:
finitely many weighted worlds with an atom valuation. It doubles as an
exact base measure for the evaluator and as the oracle the other
modules are tested against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .adapters import AltDistribution
from .errors import DataFormatError, MeasureZeroError
from .formulas import Atom, Formula, Implies, Not, Seq, serialize_formula

__all__ = [
    "StringDist",
    "CoherenceReport",
    "audit",
    "dutch_book_margin",
    "ChainDecayResult",
    "chain_decay",
    "WorldModel",
    "AxiomAuditReport",
    "axiom_audit",
    "parse_stringdist",
    "load_stringdist",
]

DEFAULT_EPSILON = 0.05
LAMBDA_EPSILON = 1e-9


@dataclass(frozen=True)
class StringDist:
    """Probabilities for strings, with complement/equivalence/tautology marks."""

    entries: tuple[tuple[str, float], ...]
    pairs: tuple[tuple[str, str], ...] = ()
    equivalences: tuple[tuple[str, ...], ...] = ()
    tautologies: tuple[str, ...] = ()

    def prob(self, s: str) -> float:
        for k, p in self.entries:
            if k == s:
                return p
        raise KeyError(s)


def parse_stringdist(text: str) -> StringDist:
    entries: list[tuple[str, float]] = []
    pairs: list[tuple[str, str]] = []
    equivalences: list[tuple[str, ...]] = []
    tautologies: list[str] = []
    problems: list[str] = []
    section = "entries"
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            name = line.strip().lstrip("#").strip()
            if name in ("pairs", "equiv", "taut"):
                section = name
            else:
                problems.append(f"line {lineno}: unknown section {line.strip()!r}")
            continue
        cells = line.split("\t")
        if section == "entries":
            if len(cells) != 2:
                problems.append(f"line {lineno}: expected '<prob>\\t<string>'")
                continue
            try:
                p = float(cells[0])
            except ValueError:
                problems.append(f"line {lineno}: bad probability {cells[0]!r}")
                continue
            if not 0.0 <= p <= 1.0:
                problems.append(f"line {lineno}: probability {p} outside [0, 1]")
                continue
            if cells[1] in seen:
                problems.append(f"line {lineno}: duplicate string {cells[1]!r}")
                continue
            seen.add(cells[1])
            entries.append((cells[1], p))
        elif section == "pairs":
            if len(cells) != 2:
                problems.append(f"line {lineno}: pair needs exactly 2 strings")
                continue
            pairs.append((cells[0], cells[1]))
        elif section == "equiv":
            if len(cells) < 2:
                problems.append(f"line {lineno}: equivalence class needs at least 2 strings")
                continue
            equivalences.append(tuple(cells))
        else:
            tautologies.append(line)
    known = {k for k, _ in entries}
    for a, b in pairs:
        for s in (a, b):
            if s not in known:
                problems.append(f"pair references unknown string {s!r}")
    for cls in equivalences:
        for s in cls:
            if s not in known:
                problems.append(f"equivalence references unknown string {s!r}")
    for s in tautologies:
        if s not in known:
            problems.append(f"tautology references unknown string {s!r}")
    if problems:
        raise DataFormatError(problems)
    return StringDist(tuple(entries), tuple(pairs), tuple(equivalences), tuple(tautologies))


def load_stringdist(path: str | Path) -> StringDist:
    return parse_stringdist(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class CoherenceReport:
    """Per-item incoherence metrics; any |value| above epsilon trips the flag."""

    epsilon: float
    complement_deficits: tuple[tuple[tuple[str, str], float], ...]
    tautology_gaps: tuple[tuple[str, float], ...]
    equivalence_divergences: tuple[tuple[tuple[str, ...], float], ...]
    strong_hallucination: bool

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "complement_deficits": [
                {"pair": list(pair), "deficit": v} for pair, v in self.complement_deficits
            ],
            "tautology_gaps": [{"string": s, "gap": v} for s, v in self.tautology_gaps],
            "equivalence_divergences": [
                {"class": list(cls), "divergence": v} for cls, v in self.equivalence_divergences
            ],
            "strong_hallucination": self.strong_hallucination,
        }


def audit(dist: StringDist, epsilon: float = DEFAULT_EPSILON) -> CoherenceReport:
    """Measure the distance from coherence for every marked relation.

    Complement deficit is 1 minus the pair's total mass (negative when the
    pair overshoots), tautology gap is 1 minus the assigned value, and an
    equivalence divergence is the widest spread inside the class.
    """
    deficits = tuple(
        ((a, b), 1.0 - (dist.prob(a) + dist.prob(b))) for a, b in dist.pairs
    )
    gaps = tuple((s, 1.0 - dist.prob(s)) for s in dist.tautologies)
    divergences = []
    for cls in dist.equivalences:
        values = [dist.prob(s) for s in cls]
        divergences.append((cls, max(values) - min(values)))
    flag = (
        any(abs(v) > epsilon for _, v in deficits)
        or any(abs(v) > epsilon for _, v in gaps)
        or any(v > epsilon for _, v in divergences)
    )
    return CoherenceReport(
        epsilon=epsilon,
        complement_deficits=deficits,
        tautology_gaps=gaps,
        equivalence_divergences=tuple(divergences),
        strong_hallucination=flag,
    )


def dutch_book_margin(partition: AltDistribution) -> float:
    """Guaranteed profit per unit stake against bets priced by `partition`.

    The alternatives are taken as exclusive and exhaustive; any gap between
    their total price and 1 can be locked in by buying (undershoot) or
    selling (overshoot) the whole book.
    """
    return abs(1.0 - partition.total())


@dataclass(frozen=True)
class ChainDecayResult:
    curve: tuple[float, ...]
    crossing_index: int | None  # 1-based step count, None if never crossed


def chain_decay(step_probs: Sequence[float], distractor: float) -> ChainDecayResult:
    """Cumulative product of per-step probabilities against a fixed rival.

    Each step must lie strictly inside (0, 1): a certain step would make
    the chain degenerate. Returns the running products and the first
    1-based position where the chain falls below the distractor.
    """
    if not step_probs:
        raise ValueError("need at least one step probability")
    for i, p in enumerate(step_probs):
        if not 0.0 < p < 1.0:
            raise ValueError(f"step {i} probability {p} outside (0, 1)")
    if not 0.0 < distractor < 1.0:
        raise ValueError(f"distractor probability {distractor} outside (0, 1)")
    curve: list[float] = []
    running = 1.0
    crossing: int | None = None
    for i, p in enumerate(step_probs):
        running *= p
        curve.append(running)
        if crossing is None and running < distractor:
            crossing = i + 1
    return ChainDecayResult(tuple(curve), crossing)


class _WorldModelBase:
    """Exact base measure induced by a world model."""

    def __init__(self, wm: "WorldModel"):
        self._wm = wm

    def prob(self, atom: str, context: tuple[str, ...]) -> float:
        given = self._wm.atom_extension(atom=None, names=context)
        m = self._wm.mass(given)
        if m == 0.0:
            raise MeasureZeroError(f"context {context!r} has zero mass")
        inter = given & self._wm.atom_extension(atom)
        return self._wm.mass(inter) / m


@dataclass(frozen=True)
class WorldModel:
    """Finitely many weighted worlds plus an atom valuation."""

    worlds: tuple[str, ...]
    weights: tuple[float, ...]
    valuation: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.worlds) != len(self.weights):
            raise ValueError("worlds and weights must have equal length")
        if len(set(self.worlds)) != len(self.worlds):
            raise ValueError("duplicate world ids")
        if any(w < 0 for w in self.weights):
            raise ValueError("negative weight")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {sum(self.weights)}, not 1")
        universe = set(self.worlds)
        for atom, ext in self.valuation.items():
            if not set(ext) <= universe:
                raise ValueError(f"valuation of {atom!r} mentions unknown worlds")

    def atom_extension(self, atom: str | None, names: Sequence[str] = ()) -> frozenset[str]:
        """Worlds satisfying an atom, or the conjunction of `names`."""
        out = frozenset(self.worlds)
        for name in names:
            out &= self._lookup(name)
        if atom is not None:
            out &= self._lookup(atom)
        return out

    def _lookup(self, atom: str) -> frozenset[str]:
        try:
            return self.valuation[atom]
        except KeyError:
            raise ValueError(f"atom {atom!r} missing from valuation") from None

    def extension(self, f: Formula) -> frozenset[str]:
        if isinstance(f, Atom):
            return self._lookup(f.name)
        if isinstance(f, Not):
            return frozenset(self.worlds) - self.extension(f.inner)
        if isinstance(f, Seq):
            return self.extension(f.left) & self.extension(f.right)
        if isinstance(f, Implies):
            return (frozenset(self.worlds) - self.extension(f.antecedent)) | self.extension(
                f.consequent
            )
        raise TypeError(f"not a formula: {f!r}")

    def mass(self, worlds: frozenset[str]) -> float:
        index = {w: weight for w, weight in zip(self.worlds, self.weights)}
        return sum(index[w] for w in worlds)

    def prob(self, f: Formula) -> float:
        return self.mass(self.extension(f))

    def conditional(self, f: Formula, given: Formula) -> float:
        m = self.prob(given)
        if m == 0.0:
            raise MeasureZeroError(f"conditioning on zero-mass {serialize_formula(given)!r}")
        return self.mass(self.extension(f) & self.extension(given)) / m

    def base_measure(self) -> _WorldModelBase:
        return _WorldModelBase(self)


@dataclass(frozen=True)
class AxiomAuditReport:
    checked: int
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def axiom_audit(wm: WorldModel, formulas: Sequence[Formula]) -> AxiomAuditReport:
    """Verify the finite-additivity laws on a world model over given formulas.

    Checks, per formula: complement (prob of the negation is 1 minus the
    prob) and tautology (full extension gets 1). Per ordered pair:
    entailment monotonicity, additivity on disjoint extensions, and
    conjunction probability equal to intersection mass.
    """
    tol = 1e-12
    checked = 0
    violations: list[str] = []
    all_worlds = frozenset(wm.worlds)

    def note(msg: str):
        violations.append(msg)

    for f in formulas:
        name = serialize_formula(f)
        checked += 1
        if abs(wm.prob(Not(f)) - (1.0 - wm.prob(f))) > tol:
            note(f"complement law fails for {name}")
        if wm.extension(f) == all_worlds:
            checked += 1
            if abs(wm.prob(f) - 1.0) > tol:
                note(f"tautology {name} not assigned 1")
    for f in formulas:
        for g in formulas:
            ef, eg = wm.extension(f), wm.extension(g)
            nf, ng = serialize_formula(f), serialize_formula(g)
            if ef <= eg:
                checked += 1
                if wm.prob(f) > wm.prob(g) + tol:
                    note(f"monotonicity fails: {nf} entails {ng}")
            if not ef & eg:
                checked += 1
                if abs(wm.mass(ef | eg) - (wm.prob(f) + wm.prob(g))) > tol:
                    note(f"additivity fails on disjoint {nf}, {ng}")
            checked += 1
            if abs(wm.prob(Seq(f, g)) - wm.mass(ef & eg)) > tol:
                note(f"conjunction mass mismatch for {nf} . {ng}")
    return AxiomAuditReport(checked=checked, violations=tuple(violations))
