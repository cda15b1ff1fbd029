"""Independent oracles shared by the test modules.

Everything here recomputes semantics from first principles (direct
recursion over worlds and maps) so the package code is never checking
itself.
"""

from __future__ import annotations

import itertools
import random

from cohlayer.formulas import Atom, Formula, Implies, Not, Seq
from cohlayer import structures as st


def truth(f: Formula, true_atoms: frozenset[str]) -> bool:
    if isinstance(f, Atom):
        return f.name in true_atoms
    if isinstance(f, Not):
        return not truth(f.inner, true_atoms)
    if isinstance(f, Seq):
        return truth(f.left, true_atoms) and truth(f.right, true_atoms)
    return (not truth(f.antecedent, true_atoms)) or truth(f.consequent, true_atoms)


def set_prob(worlds: list[tuple[float, frozenset[str]]], f: Formula) -> float:
    """Brute-force probability: total weight of worlds making f true."""
    return sum(w for w, val in worlds if truth(f, val))


def set_conditional(
    worlds: list[tuple[float, frozenset[str]]], f: Formula, given: list[Formula]
) -> float:
    num = den = 0.0
    for w, val in worlds:
        if all(truth(g, val) for g in given):
            den += w
            if truth(f, val):
                num += w
    if den == 0.0:
        raise ZeroDivisionError("zero-mass condition")
    return num / den


def enum_formulas(atom_names: tuple[str, ...], max_nodes: int) -> list[Formula]:
    """Every formula with at most max_nodes nodes over the given atoms."""
    by_size: dict[int, list[Formula]] = {1: [Atom(a) for a in atom_names]}
    for n in range(2, max_nodes + 1):
        level: list[Formula] = [Not(f) for f in by_size[n - 1]]
        for i in range(1, n - 1):
            for left in by_size[i]:
                for right in by_size[n - 1 - i]:
                    level.append(Seq(left, right))
                    level.append(Implies(left, right))
        by_size[n] = level
    out: list[Formula] = []
    for n in range(1, max_nodes + 1):
        out.extend(by_size[n])
    return out


def random_formula(rng: random.Random, atom_names: tuple[str, ...], depth: int) -> Formula:
    if depth <= 0:
        return Atom(rng.choice(atom_names))
    roll = rng.random()
    if roll < 0.3:
        return Atom(rng.choice(atom_names))
    if roll < 0.55:
        return Not(random_formula(rng, atom_names, depth - 1))
    left = random_formula(rng, atom_names, depth - 1)
    right = random_formula(rng, atom_names, depth - 1)
    return Seq(left, right) if roll < 0.8 else Implies(left, right)


def weight_vectors(n: int, denominator: int) -> list[tuple[float, ...]]:
    """All length-n nonnegative vectors of k/denominator values summing to 1."""
    out = []
    for combo in itertools.product(range(denominator + 1), repeat=n):
        if sum(combo) == denominator:
            out.append(tuple(k / denominator for k in combo))
    return out


def all_valuations(atom_names: tuple[str, ...], world_ids: tuple[str, ...]):
    """Every assignment of an extension (subset of worlds) to every atom."""
    subsets = []
    for r in range(len(world_ids) + 1):
        subsets.extend(frozenset(c) for c in itertools.combinations(world_ids, r))
    for combo in itertools.product(subsets, repeat=len(atom_names)):
        yield dict(zip(atom_names, combo))


# -- structure satisfaction, the slow way


def _holds(phi: st.Structure, verifier: st.Structure, mapping: dict[str, str]) -> bool:
    for cond in phi.conditions:
        if isinstance(cond, st.Atom):
            image = tuple(mapping[a] for a in cond.args)
            if st.Atom(cond.predicate, image) not in verifier.conditions:
                return False
        elif isinstance(cond, st.Not):
            inner = cond.inner
            if any(
                _holds(inner, verifier, {**mapping, **dict(zip(sorted(set(inner.universe) - mapping.keys()), combo))})
                for combo in itertools.product(
                    sorted(verifier.universe), repeat=len(set(inner.universe) - mapping.keys())
                )
            ):
                return False
        else:
            ant, cons = cond.antecedent, cond.consequent
            ant_free = sorted(set(ant.universe) - mapping.keys())
            for combo in itertools.product(sorted(verifier.universe), repeat=len(ant_free)):
                g = {**mapping, **dict(zip(ant_free, combo))}
                if not _holds(ant, verifier, g):
                    continue
                cons_free = sorted(set(cons.universe) - g.keys())
                if not any(
                    _holds(cons, verifier, {**g, **dict(zip(cons_free, c2))})
                    for c2 in itertools.product(sorted(verifier.universe), repeat=len(cons_free))
                ):
                    return False
    return True


def brute_force_satisfaction(phi: st.Structure, verifier: st.Structure) -> bool:
    """Existential check over every total map from phi's universe."""
    ids = sorted(phi.universe)
    for combo in itertools.product(sorted(verifier.universe), repeat=len(ids)):
        if _holds(phi, verifier, dict(zip(ids, combo))):
            return True
    return False
