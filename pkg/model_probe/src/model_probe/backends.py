"""Model backends for the probe service.

A backend answers the three probe tasks with plain positive weights; the
service layer renormalizes where the wire contract requires it. The hash
backend is fully deterministic and needs no weights. The transformers
backend wraps pretrained pipelines, selected per task by model id, so a
deployment can serve a real masked LM next to a stub NLI head while a
checkpoint is still being chosen.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

STUB_MODEL = "stub"

NLI_LABELS = ("entailment", "contradiction", "neutral")

# vocabulary for the stub's mask distribution; location-ish nouns so
# sampled completions read like cloze answers
_VOCAB = (
    "school", "hospital", "university", "church", "park", "museum",
    "library", "station", "restaurant", "hotel", "theater", "market",
    "farm", "factory", "harbor", "castle", "bridge", "garden",
    "village", "city", "house", "office", "studio", "club",
)


class Backend(Protocol):
    def nli(self, premise: str, hypothesis: str) -> dict[str, float]: ...

    def fill_mask(self, text: str, k: int) -> list[tuple[str, float]]: ...

    def qa(self, question: str, context: str) -> tuple[float, float]: ...


def _unit(*parts: str) -> float:
    """Deterministic float strictly inside (0, 1) derived from the parts."""
    digest = hashlib.sha256("\x1f".join(parts).encode()).digest()
    return (int.from_bytes(digest[:8], "big") + 1) / (2**64 + 2)


class HashBackend:
    """Deterministic stand-in for a real model.

    Every distribution is a pure function of the request text and the
    seed, so identical requests always get identical responses, across
    calls and across processes.
    """

    def __init__(self, seed: int = 0):
        self._tag = str(seed)

    def nli(self, premise: str, hypothesis: str) -> dict[str, float]:
        weights = {
            label: _unit(self._tag, "nli", label, premise, hypothesis)
            for label in NLI_LABELS
        }
        if premise.strip().lower() == hypothesis.strip().lower():
            # a sentence entails itself; hand entailment the largest weight
            weights["entailment"] = max(weights.values()) + 1.0
        return weights

    def fill_mask(self, text: str, k: int) -> list[tuple[str, float]]:
        weights = [(token, _unit(self._tag, "mask", token, text)) for token in _VOCAB]
        total = sum(w for _, w in weights)
        scored = [(token, w / total) for token, w in weights]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:k]

    def qa(self, question: str, context: str) -> tuple[float, float]:
        return (
            _unit(self._tag, "qa", "yes", question, context),
            _unit(self._tag, "qa", "no", question, context),
        )


def _nli_label(name: str) -> str | None:
    name = name.lower()
    if "entail" in name:
        return "entailment"
    if "contra" in name:
        return "contradiction"
    if "neutral" in name:
        return "neutral"
    return None


class TransformersBackend:
    """Wraps pretrained pipelines, one per task, built on first use.

    Tasks whose model id is the stub marker fall back to the hash
    backend. Inference runs in eval mode on fixed weights, so repeated
    requests score identically.
    """

    _KINDS = {
        "nli": "text-classification",
        "fill_mask": "fill-mask",
        "qa": "zero-shot-classification",
    }

    def __init__(self, models: dict[str, str], device: str = "cpu"):
        self._models = dict(models)
        self._device = device
        self._stub = HashBackend()
        self._pipes: dict[str, object] = {}

    def _pipe(self, task: str):
        pipe = self._pipes.get(task)
        if pipe is None:
            from transformers import pipeline

            pipe = pipeline(self._KINDS[task], model=self._models[task], device=self._device)
            self._pipes[task] = pipe
        return pipe

    def load(self) -> None:
        """Build every non-stub pipeline up front."""
        for task in self._KINDS:
            if self._models.get(task, STUB_MODEL) != STUB_MODEL:
                self._pipe(task)

    def nli(self, premise: str, hypothesis: str) -> dict[str, float]:
        if self._models["nli"] == STUB_MODEL:
            return self._stub.nli(premise, hypothesis)
        rows = self._pipe("nli")({"text": premise, "text_pair": hypothesis}, top_k=None)
        weights = dict.fromkeys(NLI_LABELS, 0.0)
        matched = 0
        for row in rows:
            label = _nli_label(row["label"])
            if label is not None:
                weights[label] = float(row["score"])
                matched += 1
        if matched < len(NLI_LABELS):
            raise RuntimeError(
                f"model {self._models['nli']!r} labels do not look like NLI labels: "
                f"{[row['label'] for row in rows]}"
            )
        return weights

    def fill_mask(self, text: str, k: int) -> list[tuple[str, float]]:
        if self._models["fill_mask"] == STUB_MODEL:
            return self._stub.fill_mask(text, k)
        pipe = self._pipe("fill_mask")
        mask = pipe.tokenizer.mask_token
        rows = pipe(text.replace("[MASK]", mask), top_k=k)
        out: list[tuple[str, float]] = []
        seen: set[str] = set()
        for row in rows:
            token = row["token_str"].strip()
            # subword variants can collapse to the same surface token
            if token and token not in seen:
                seen.add(token)
                out.append((token, float(row["score"])))
        return out[:k]

    def qa(self, question: str, context: str) -> tuple[float, float]:
        if self._models["qa"] == STUB_MODEL:
            return self._stub.qa(question, context)
        out = self._pipe("qa")(
            f"{context}\n{question}",
            candidate_labels=["yes", "no"],
            hypothesis_template="The answer is {}.",
        )
        scores = dict(zip(out["labels"], out["scores"]))
        return float(scores["yes"]), float(scores["no"])


def make_backend(models: dict[str, str], device: str = "cpu") -> Backend:
    if all(model == STUB_MODEL for model in models.values()):
        return HashBackend()
    return TransformersBackend(models, device=device)
