"""StringDist parsing, coherence auditing, and the world-model oracle."""

import pytest

from cohlayer.adapters import AltDistribution
from cohlayer.audit import (
    AxiomAuditReport,
    WorldModel,
    audit,
    axiom_audit,
    chain_decay,
    dutch_book_margin,
    load_stringdist,
    parse_stringdist,
)
from cohlayer.datasets import fixture_path
from cohlayer.errors import DataFormatError, MeasureZeroError
from cohlayer.formulas import parse_formula

from helpers import set_prob


def test_parse_stringdist_sections():
    dist = parse_stringdist(
        "0.7\train\n"
        "0.2\tno rain\n"
        "0.9\train or no rain\n"
        "#pairs\n"
        "rain\tno rain\n"
        "#equiv\n"
        "rain\train\n"
        "#taut\n"
        "rain or no rain\n"
    )
    assert dist.entries == (("rain", 0.7), ("no rain", 0.2), ("rain or no rain", 0.9))
    assert dist.pairs == (("rain", "no rain"),)
    assert dist.equivalences == (("rain", "rain"),)
    assert dist.tautologies == ("rain or no rain",)
    assert dist.prob("no rain") == 0.2
    with pytest.raises(KeyError):
        dist.prob("snow")


def test_parse_stringdist_collects_all_problems():
    bad = (
        "x\train\n"          # unparseable probability
        "1.5\tsnow\n"        # out of range
        "0.5\tfog\n"
        "0.5\tfog\n"         # duplicate
        "just one cell\n"    # missing tab
        "#nonsense\n"        # unknown section
        "#pairs\n"
        "fog\tmissing\n"     # unknown reference
        "#equiv\n"
        "fog\n"              # class too small
        "#taut\n"
        "also missing\n"     # unknown reference
    )
    with pytest.raises(DataFormatError) as err:
        parse_stringdist(bad)
    text = "\n".join(err.value.problems)
    for needle in (
        "bad probability",
        "outside [0, 1]",
        "duplicate string",
        "expected '<prob>",
        "unknown section",
        "unknown string 'missing'",
        "at least 2",
        "unknown string 'also missing'",
    ):
        assert needle in text
    assert len(err.value.problems) == 8


def test_audit_flags_incoherent_complements():
    dist = load_stringdist(fixture_path("incoherence_demo.stringdist"))
    report = audit(dist)
    assert report.epsilon == 0.05
    assert report.complement_deficits == (
        (("it is raining", "it is not raining"), 0.75),
    )
    assert report.tautology_gaps == (("it is raining or it is not raining", 0.5),)
    assert report.equivalence_divergences == ()
    assert report.strong_hallucination

    d = report.to_dict()
    assert d["complement_deficits"] == [
        {"pair": ["it is raining", "it is not raining"], "deficit": 0.75}
    ]
    assert d["strong_hallucination"] is True


def test_audit_flags_equivalence_divergence():
    dist = load_stringdist(fixture_path("equivalence_bets.stringdist"))
    report = audit(dist)
    ((cls, div),) = report.equivalence_divergences
    assert cls == ("it is not the case that the weather is humid", "the weather is dry")
    assert div == pytest.approx(0.28)
    # the complement pair itself is coherent here
    ((_, deficit),) = report.complement_deficits
    assert deficit == pytest.approx(0.0)
    assert report.strong_hallucination


def test_audit_passes_coherent_assignment():
    dist = parse_stringdist(
        "0.3\tp\n0.7\tnot p\n1\tp or not p\n"
        "#pairs\np\tnot p\n#taut\np or not p\n"
    )
    report = audit(dist, epsilon=1e-9)
    assert not report.strong_hallucination
    assert report.complement_deficits[0][1] == pytest.approx(0.0)


def test_audit_overshoot_is_flagged():
    dist = parse_stringdist("0.8\tp\n0.8\tnot p\n#pairs\np\tnot p\n")
    report = audit(dist)
    assert report.complement_deficits[0][1] == pytest.approx(-0.6)
    assert report.strong_hallucination


def test_dutch_book_margin():
    assert dutch_book_margin(AltDistribution.of([("p", 0.25), ("not p", 0.0)])) == 0.75
    assert dutch_book_margin(AltDistribution.of([("p", 0.7), ("not p", 0.6)])) == pytest.approx(0.3)
    assert dutch_book_margin(AltDistribution.of([("p", 0.4), ("not p", 0.6)])) == pytest.approx(0.0)


def test_chain_decay_curve_and_crossing():
    result = chain_decay([0.5, 0.5, 0.5], distractor=0.3)
    assert result.curve == (0.5, 0.25, 0.125)
    assert result.crossing_index == 2

    result = chain_decay([0.9, 0.9], distractor=0.5)
    assert result.crossing_index is None

    # the curve is a running product, so it never increases
    result = chain_decay([0.8] * 12, distractor=0.1)
    assert all(a > b for a, b in zip(result.curve, result.curve[1:]))
    expected = next(i + 1 for i in range(12) if 0.8 ** (i + 1) < 0.1)
    assert result.crossing_index == expected


def test_chain_decay_rejects_degenerate_steps():
    with pytest.raises(ValueError, match="at least one"):
        chain_decay([], distractor=0.5)
    with pytest.raises(ValueError, match="step 1"):
        chain_decay([0.5, 1.0], distractor=0.5)
    with pytest.raises(ValueError, match="step 0"):
        chain_decay([0.0], distractor=0.5)
    with pytest.raises(ValueError, match="distractor"):
        chain_decay([0.5], distractor=1.0)


def make_model():
    return WorldModel(
        worlds=("w1", "w2", "w3", "w4"),
        weights=(0.4, 0.3, 0.2, 0.1),
        valuation={
            "a": frozenset({"w1", "w2"}),
            "b": frozenset({"w2", "w3"}),
            "c": frozenset({"w1", "w4"}),
        },
    )


def test_world_model_validation():
    with pytest.raises(ValueError, match="equal length"):
        WorldModel(("w1",), (0.5, 0.5))
    with pytest.raises(ValueError, match="duplicate"):
        WorldModel(("w1", "w1"), (0.5, 0.5))
    with pytest.raises(ValueError, match="negative"):
        WorldModel(("w1", "w2"), (-0.5, 1.5))
    with pytest.raises(ValueError, match="sum to"):
        WorldModel(("w1", "w2"), (0.6, 0.6))
    with pytest.raises(ValueError, match="unknown worlds"):
        WorldModel(("w1",), (1.0,), valuation={"a": frozenset({"zz"})})


def test_world_model_probabilities():
    wm = make_model()
    worlds = [
        (0.4, frozenset({"a", "c"})),
        (0.3, frozenset({"a", "b"})),
        (0.2, frozenset({"b"})),
        (0.1, frozenset({"c"})),
    ]
    for text in ("a", "not a", "a . b", "a => b", "not (b . c)", "a => b => c"):
        f = parse_formula(text)
        assert wm.prob(f) == pytest.approx(set_prob(worlds, f), abs=1e-12)
    assert wm.conditional(parse_formula("b"), parse_formula("a")) == pytest.approx(0.3 / 0.7)
    with pytest.raises(ValueError, match="missing from valuation"):
        wm.prob(parse_formula("zz"))


def test_world_model_zero_mass_conditional():
    wm = make_model()
    with pytest.raises(MeasureZeroError):
        wm.conditional(parse_formula("a"), parse_formula("b . c"))


def test_world_model_base_measure():
    base = make_model().base_measure()
    assert base.prob("a", ()) == pytest.approx(0.7)
    assert base.prob("b", ("a",)) == pytest.approx(0.3 / 0.7)
    with pytest.raises(MeasureZeroError):
        base.prob("a", ("b", "c"))


def test_axiom_audit_world_model_is_coherent():
    wm = make_model()
    formulas = [
        parse_formula(t)
        for t in ("a", "b", "c", "not a", "a . b", "a => b", "not (a . not a)", "b . not b")
    ]
    report = axiom_audit(wm, formulas)
    assert isinstance(report, AxiomAuditReport)
    assert report.ok
    assert report.violations == ()
    # per-formula checks plus one per ordered pair, plus the conditional ones
    assert report.checked > len(formulas) ** 2


def test_axiom_audit_counts_tautologies():
    wm = WorldModel(("w1",), (1.0,), valuation={"a": frozenset({"w1"})})
    f = parse_formula("a")
    report = axiom_audit(wm, [f])
    # complement + tautology + (monotone, conjunction) on the single pair,
    # plus no disjointness check since the extension overlaps itself
    assert report.checked == 4
    assert report.ok
