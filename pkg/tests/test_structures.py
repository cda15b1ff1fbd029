"""Structures, embeddings, and embedding-based satisfaction."""

import random

import pytest

from cohlayer.errors import CapExceededError, ParseError
from cohlayer.structures import (
    Atom,
    Embedding,
    Implies,
    Not,
    ScopedContext,
    Structure,
    check_satisfaction,
    find_embedding,
    merge,
    parse_structure,
    serialize_structure,
    validate_structure,
)

from helpers import brute_force_satisfaction


def S(ids, conds=()):
    return Structure.build(ids, conds)


def test_merge_unions_universes_and_conditions():
    a = S({"x"}, {Atom("car", ("x",))})
    b = S({"x", "y"}, {Atom("likes", ("x", "y"))})
    m = merge(a, b)
    assert m.universe == frozenset({"x", "y"})
    assert m.conditions == frozenset({Atom("car", ("x",)), Atom("likes", ("x", "y"))})


def test_parse_and_serialize():
    s = parse_structure("{x, y | car(x), likes(x,y)}")
    assert s.universe == frozenset({"x", "y"})
    assert Atom("likes", ("x", "y")) in s.conditions
    assert serialize_structure(s) == "{x, y | car(x), likes(x,y)}"

    nested = parse_structure("{x | dog(x), not { | barks(x)}}")
    assert Not(S(set(), {Atom("barks", ("x",))})) in nested.conditions

    imp = parse_structure("{ | {n | dog(n)} => { | barks(n)}}")
    assert serialize_structure(parse_structure(serialize_structure(imp))) == serialize_structure(imp)


def test_parse_rejects_undeclared_referents():
    with pytest.raises(ValueError, match="undeclared"):
        parse_structure("{x | likes(x,y)}")
    with pytest.raises(ParseError):
        parse_structure("{x | car(x)")
    with pytest.raises(ParseError):
        parse_structure("{x car(x)}")


def test_validate_consequent_sees_antecedent_universe():
    # the consequent may reuse what the antecedent binds
    cond = Implies(S({"n"}, {Atom("dog", ("n",))}), S(set(), {Atom("barks", ("n",))}))
    validate_structure(S(set(), {cond}))
    # but not the other way round
    bad = Implies(S(set(), {Atom("dog", ("m",))}), S({"m"}, set()))
    with pytest.raises(ValueError, match="undeclared"):
        validate_structure(S(set(), {bad}))


def test_find_embedding_prefers_lexicographic():
    phi = S({"x"}, {Atom("p", ("x",))})
    target = S({"a", "b"}, {Atom("p", ("a",)), Atom("p", ("b",))})
    found = find_embedding(phi, target)
    assert found == Embedding.from_mapping({"x": "a"})
    assert found["x"] == "a"


def test_find_embedding_none_when_impossible():
    phi = S({"x"}, {Atom("p", ("x",))})
    target = S({"a"}, {Atom("q", ("a",))})
    assert find_embedding(phi, target) is None


def test_negation_as_failure():
    # "a dog that does not bark" embeds only onto the quiet dog
    phi = S({"x"}, {Atom("dog", ("x",)), Not(S(set(), {Atom("barks", ("x",))}))})
    target = S(
        {"d1", "d2"},
        {Atom("dog", ("d1",)), Atom("dog", ("d2",)), Atom("barks", ("d1",))},
    )
    assert find_embedding(phi, target) == Embedding.from_mapping({"x": "d2"})


def test_implication_condition():
    # every dog barks: holds in a world where both dogs bark
    every = Implies(S({"n"}, {Atom("dog", ("n",))}), S(set(), {Atom("barks", ("n",))}))
    phi = S(set(), {every})
    good = S(
        {"d1", "d2"},
        {Atom("dog", ("d1",)), Atom("dog", ("d2",)), Atom("barks", ("d1",)), Atom("barks", ("d2",))},
    )
    bad = S({"d1", "d2"}, {Atom("dog", ("d1",)), Atom("dog", ("d2",)), Atom("barks", ("d1",))})
    assert check_satisfaction(phi, good)
    assert not check_satisfaction(phi, bad)


def test_check_satisfaction_with_partial_base():
    phi = S({"x", "y"}, {Atom("likes", ("x", "y"))})
    target = S({"a", "b"}, {Atom("likes", ("a", "b"))})
    assert check_satisfaction(phi, target, base=Embedding.from_mapping({"x": "a"}))
    assert not check_satisfaction(phi, target, base=Embedding.from_mapping({"x": "b"}))


def test_scoped_context_negated():
    pre = S({"x"}, {Atom("woman", ("x",))})
    sco = S(set(), {Atom("reads", ("x",))})
    ctx = ScopedContext(pre, sco)
    assert ctx.whole() == merge(pre, sco)
    neg = ctx.negated()
    assert neg.universe == pre.universe
    assert Not(sco) in neg.conditions
    assert Atom("woman", ("x",)) in neg.conditions


def test_cap_exceeded():
    phi = S({f"x{i}" for i in range(8)})
    target = S({f"a{i}" for i in range(8)})
    with pytest.raises(CapExceededError):
        find_embedding(phi, target, cap=10_000)


def test_satisfaction_matches_brute_force_on_random_cases():
    rng = random.Random(7)
    preds = ("p", "q")
    for _ in range(300):
        n_target = rng.randint(1, 3)
        ids = tuple(f"a{i}" for i in range(n_target))
        conds = set()
        for pred in preds:
            for x in ids:
                if rng.random() < 0.5:
                    conds.add(Atom(pred, (x,)))
        target = S(set(ids), conds)

        x = "x"
        pool = [
            Atom("p", (x,)),
            Atom("q", (x,)),
            Not(S(set(), {Atom("p", (x,))})),
            Not(S({"n"}, {Atom("q", ("n",))})),
            Implies(S({"n"}, {Atom("p", ("n",))}), S(set(), {Atom("q", ("n",))})),
        ]
        phi = S({x}, set(rng.sample(pool, rng.randint(0, 3))))
        assert check_satisfaction(phi, target) == brute_force_satisfaction(phi, target)
