"""Task adapters: cloze-completion reranking and yes/no answer flipping.

Both adapters share the same move: the model is only ever asked about the
positive surface form, and the negated variant is answered by taking
complements of those positive probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import InvariantViolationError

__all__ = [
    "AltDistribution",
    "QAQuery",
    "qa_answer",
    "MkrResult",
    "mkr_rerank",
]


@dataclass(frozen=True)
class AltDistribution:
    """Labelled alternatives with probabilities.

    normalized=True asserts the probabilities form a distribution (sum
    within 1e-6 of 1); otherwise they are free to sum below 1, as model
    top-k lists do.
    """

    alternatives: tuple[tuple[str, float], ...]
    normalized: bool = False

    def __post_init__(self):
        labels = [label for label, _ in self.alternatives]
        if len(set(labels)) != len(labels):
            raise InvariantViolationError(f"duplicate alternative labels in {labels}")
        for label, p in self.alternatives:
            if not 0.0 <= p <= 1.0:
                raise InvariantViolationError(f"probability {p} for {label!r} outside [0, 1]")
        if self.normalized:
            total = sum(p for _, p in self.alternatives)
            if abs(total - 1.0) > 1e-6:
                raise InvariantViolationError(f"normalized distribution sums to {total}")

    @classmethod
    def of(cls, pairs: Iterable[tuple[str, float]], normalized: bool = False) -> "AltDistribution":
        return cls(tuple((str(k), float(v)) for k, v in pairs), normalized)

    def total(self) -> float:
        return sum(p for _, p in self.alternatives)

    def prob(self, label: str) -> float:
        for k, p in self.alternatives:
            if k == label:
                return p
        raise KeyError(label)

    def argmax(self) -> str:
        """Highest-probability label; ties break to the lexicographically least."""
        if not self.alternatives:
            raise InvariantViolationError("empty distribution")
        best = max(p for _, p in self.alternatives)
        return min(k for k, p in self.alternatives if p == best)

    def renormalized(self) -> "AltDistribution":
        total = self.total()
        if total <= 0.0:
            raise InvariantViolationError("cannot renormalize zero mass")
        return AltDistribution(
            tuple((k, p / total) for k, p in self.alternatives), normalized=True
        )


@dataclass(frozen=True)
class QAQuery:
    """A yes/no question with the model's yes-probability on the positive form."""

    question_id: str
    polarity: str  # "positive" | "negated"
    base_yes_prob: float

    def __post_init__(self):
        if self.polarity not in ("positive", "negated"):
            raise ValueError(f"polarity must be 'positive' or 'negated', got {self.polarity!r}")
        if not 0.0 <= self.base_yes_prob <= 1.0:
            raise ValueError(f"base_yes_prob {self.base_yes_prob} outside [0, 1]")


def qa_answer(query: QAQuery) -> tuple[str, float]:
    """Answer a yes/no question; negated polarity complements the yes-mass.

    Returns (answer, probability of that answer). An exact tie goes to "N".
    """
    yes = query.base_yes_prob if query.polarity == "positive" else 1.0 - query.base_yes_prob
    if yes > 0.5:
        return ("Y", yes)
    return ("N", 1.0 - yes)


@dataclass(frozen=True)
class MkrResult:
    flipped: AltDistribution
    flipped_renormalized: AltDistribution
    selection: str


def mkr_rerank(topk: AltDistribution, k: int = 5) -> MkrResult:
    """Rerank cloze alternatives for the negated prompt.

    Each alternative's probability becomes its complement (1 - p), read off
    the positive prompt only; the selection is therefore the alternative the
    positive prompt ranked last. Uses the first min(k, available) alternatives
    in the order given; fewer than 2 is an error. Ties break to the
    lexicographically least label, mirroring argmax.
    """
    take = min(k, len(topk.alternatives))
    if take < 2:
        raise InvariantViolationError(
            f"reranking needs at least 2 alternatives, got {len(topk.alternatives)} (k={k})"
        )
    kept = topk.alternatives[:take]
    flipped = AltDistribution(tuple((label, 1.0 - p) for label, p in kept), normalized=False)
    selection = flipped.argmax()
    return MkrResult(
        flipped=flipped,
        flipped_renormalized=flipped.renormalized(),
        selection=selection,
    )
