"""Label propagation for entailment pairs under context/hypothesis negation.

Given gold or model labels for the positive pair (context C, hypothesis h)
and its companion pairs, these rules predict labels for the three negated
configurations without ever running a model on a negated sentence:

    c_nh   (C, not h)
    nc_h   (not C, h)
    nc_nh  (not C, not h)

Scoped variants split C into a presupposed part P and a scoped part, with
negation applying to the scoped part only; they consume the extra pair
labels (P, h), (h, C) and (h, scoped part). Unscoped rules treat not C as
the full complement.

Every prediction carries a `determined` flag. It is true only on branches
that are provably correct against the set-theoretic reading of the labels
(E: premise denotation contained in hypothesis denotation; Cn: disjoint;
N: neither). Branches kept for coverage whose label is merely heuristic
report determined=False.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

from .errors import MissingLabelError

__all__ = [
    "Label2",
    "Label3",
    "PairLabels",
    "ConfigPrediction",
    "CONFIGS",
    "flip3",
    "to_label2",
    "rte_unscoped",
    "rte_scoped",
    "snli_scoped",
    "snli_basic",
]

CONFIGS = ("c_nh", "nc_h", "nc_nh")


class Label3(Enum):
    ENTAILMENT = "entailment"
    CONTRADICTION = "contradiction"
    NEUTRAL = "neutral"


class Label2(Enum):
    ENTAILMENT = "entailment"
    NOT_ENTAILMENT = "not_entailment"


_E3, _C3, _N3 = Label3.ENTAILMENT, Label3.CONTRADICTION, Label3.NEUTRAL
_E2, _NE2 = Label2.ENTAILMENT, Label2.NOT_ENTAILMENT


@dataclass(frozen=True)
class PairLabels:
    """Labels for the pairs the rules consume; unused ones may be None.

    c_h: (context, hypothesis)      p_h: (presupposed part, hypothesis)
    h_c: (hypothesis, context)      h_cprime: (hypothesis, scoped part)
    """

    c_h: Label2 | Label3 | None = None
    p_h: Label3 | None = None
    h_c: Label2 | Label3 | None = None
    h_cprime: Label2 | Label3 | None = None


@dataclass(frozen=True)
class ConfigPrediction:
    config: str
    label: Label2 | Label3
    determined: bool


def flip3(label: Label3) -> Label3:
    """Hypothesis negation swaps entailment and contradiction, keeps neutral."""
    if label is _E3:
        return _C3
    if label is _C3:
        return _E3
    return _N3


def to_label2(label: Label3 | Label2) -> Label2:
    """Collapse a three-way label: entailment stays, everything else does not."""
    if label is _E2 or label is _E3:
        return _E2
    return _NE2


def _need(value, name: str):
    if value is None:
        raise MissingLabelError(f"rule needs the {name} pair label")
    return value


def snli_scoped(labels: PairLabels, *, n_branch_source: str = "h_c") -> dict[str, ConfigPrediction]:
    """Three-label propagation with a presupposed/scoped context split.

    n_branch_source picks which reverse label the neutral-context branch
    consults ('h_c' default, 'h_cprime' as the alternative reading). When
    h_c is missing the branch falls back to h_cprime and warns.
    """
    if n_branch_source not in ("h_c", "h_cprime"):
        raise ValueError(f"n_branch_source must be 'h_c' or 'h_cprime', got {n_branch_source!r}")
    c_h = _need(labels.c_h, "(C, h)")
    p_h = _need(labels.p_h, "(P, h)")
    h_cprime = _need(labels.h_cprime, "(h, scoped)")

    c_nh = ConfigPrediction("c_nh", flip3(c_h), determined=True)

    if c_h is _E3:
        if p_h is _E3:
            nc_h = ConfigPrediction("nc_h", _E3, determined=True)
        elif p_h is _N3 and h_cprime is _E3:
            nc_h = ConfigPrediction("nc_h", _C3, determined=True)
        elif h_cprime is _N3:
            nc_h = ConfigPrediction("nc_h", _N3, determined=False)
        else:
            nc_h = ConfigPrediction("nc_h", _N3, determined=False)
    elif c_h is _C3:
        if p_h is _C3:
            nc_h = ConfigPrediction("nc_h", _C3, determined=True)
        elif p_h is _N3 and h_cprime is _E3:
            nc_h = ConfigPrediction("nc_h", _C3, determined=True)
        elif h_cprime is _C3:
            nc_h = ConfigPrediction("nc_h", _E3, determined=False)
        else:
            nc_h = ConfigPrediction("nc_h", _N3, determined=False)
    else:
        if n_branch_source == "h_c":
            guard = labels.h_c
            if guard is None:
                warnings.warn(
                    "no (h, C) label; neutral-context branch falling back to (h, scoped)",
                    stacklevel=2,
                )
                guard = h_cprime
        else:
            guard = h_cprime
        if guard is _E3:
            nc_h = ConfigPrediction("nc_h", _C3, determined=True)
        else:
            nc_h = ConfigPrediction("nc_h", _N3, determined=False)

    # negating the hypothesis on top of the negated context is the same
    # label flip as on the positive side, so determinedness carries over
    nc_nh = ConfigPrediction("nc_nh", flip3(nc_h.label), nc_h.determined)
    return {"c_nh": c_nh, "nc_h": nc_h, "nc_nh": nc_nh}


def snli_basic(labels: PairLabels, *, n_branch_source: str = "h_c") -> dict[str, ConfigPrediction]:
    """Three-label propagation with nothing presupposed.

    The whole context is in the negation's scope, so the presupposed-pair
    label degenerates to neutral and the scoped part is the context
    itself.
    """
    c_h = _need(labels.c_h, "(C, h)")
    h_c = _need(labels.h_c, "(h, C)")
    derived = PairLabels(c_h=c_h, p_h=_N3, h_c=h_c, h_cprime=h_c)
    if n_branch_source == "h_cprime" and labels.h_cprime is not None:
        derived = PairLabels(c_h=c_h, p_h=_N3, h_c=h_c, h_cprime=labels.h_cprime)
        return snli_scoped(derived, n_branch_source="h_cprime")
    return snli_scoped(derived, n_branch_source="h_c")


def rte_unscoped(labels: PairLabels) -> dict[str, ConfigPrediction]:
    """Two-label propagation with the negated context read as the complement."""
    c_h = _need(labels.c_h, "(C, h)")
    h_c = _need(labels.h_c, "(h, C)")

    # (C, not h): anything C entails is incompatible with its negation
    c_nh = ConfigPrediction("c_nh", _NE2, determined=(c_h is _E2))

    # (not C, h): complement loses every entailment C had, but only the
    # h-entails-C case rules out accidental coverage of the complement
    nc_h = ConfigPrediction("nc_h", _NE2, determined=(h_c is _E2))

    # (not C, not h): contraposition, sound in both directions
    if h_c is _E2:
        nc_nh = ConfigPrediction("nc_nh", _E2, determined=True)
    else:
        nc_nh = ConfigPrediction("nc_nh", _NE2, determined=True)
    return {"c_nh": c_nh, "nc_h": nc_h, "nc_nh": nc_nh}


def rte_scoped(labels: PairLabels) -> dict[str, ConfigPrediction]:
    """Two-label propagation for the negated-context configurations when the
    context splits into presupposed and scoped parts.

    The (C, not h) configuration has no scoped rule; use rte_unscoped.
    """
    c_h = _need(labels.c_h, "(C, h)")
    p_h = labels.p_h
    h_c = _need(labels.h_c, "(h, C)")
    h_cprime = _need(labels.h_cprime, "(h, scoped)")

    p_h_e = p_h is _E2 or p_h is _E3
    if h_c is _NE2:
        if c_h is _E2 and p_h_e:
            nc_h = ConfigPrediction("nc_h", _E2, determined=True)
        else:
            nc_h = ConfigPrediction("nc_h", _NE2, determined=False)
    else:
        nc_h = ConfigPrediction("nc_h", _NE2, determined=True)

    if h_c is _E2:
        if p_h_e:
            nc_nh = ConfigPrediction("nc_nh", _E2, determined=True)
        else:
            # transcribed label; h entailing C already settles the set
            # relation the other way, so this branch is not determined
            nc_nh = ConfigPrediction("nc_nh", _NE2, determined=False)
    else:
        if h_cprime is _E2:
            nc_nh = ConfigPrediction("nc_nh", _E2, determined=True)
        else:
            nc_nh = ConfigPrediction("nc_nh", _NE2, determined=False)
    return {"nc_h": nc_h, "nc_nh": nc_nh}
