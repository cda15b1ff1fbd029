"""Line-delimited dataset records, the synthetic QA generator, and reports.

Datasets are JSONL, one record per line. Validation is strict and
collects every problem in the file before raising, so a bad file reports
all offending lines at once. Reports serialize with sorted keys and no
timestamps by default, so identical runs write identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .errors import DataFormatError
from .nli import Label2, Label3

__all__ = [
    "SCHEMA_VERSION",
    "NliRecord",
    "QaRecord",
    "MkrRecord",
    "load_dataset",
    "load_nli",
    "load_qa",
    "load_mkr",
    "write_jsonl",
    "generate_syn",
    "SYN_COLORS",
    "fixture_path",
    "EvalReport",
    "write_report",
    "read_report",
]

SCHEMA_VERSION = 1


def fixture_path(name: str) -> Path:
    """Path to one of the demo data files shipped with the package."""
    path = Path(__file__).parent / "fixtures" / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return path

_LABELS_3 = {x.value for x in Label3}
_LABELS_2 = {x.value for x in Label2}
_PAIR_KEYS = ("c_h", "p_h", "h_c", "h_cprime")
_NEG_KEYS = ("c_nh", "nc_h", "nc_nh")


@dataclass(frozen=True)
class NliRecord:
    id: str
    context: str
    hypothesis: str
    label_space: int
    labels: dict[str, str]
    negated_labels: dict[str, str] = field(default_factory=dict)
    presupposed: str | None = None
    scoped: str | None = None
    negated_context: str | None = None
    negated_hypothesis: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "context": self.context,
            "hypothesis": self.hypothesis,
            "label_space": self.label_space,
            "labels": dict(self.labels),
        }
        if self.negated_labels:
            out["negated_labels"] = dict(self.negated_labels)
        for key in ("presupposed", "scoped", "negated_context", "negated_hypothesis"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


@dataclass(frozen=True)
class QaRecord:
    id: str
    context: str
    question: str
    polarity: str
    gold_answer: str
    positive_context: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "context": self.context,
            "question": self.question,
            "polarity": self.polarity,
            "gold_answer": self.gold_answer,
        }
        if self.positive_context is not None:
            out["positive_context"] = self.positive_context
        return out


@dataclass(frozen=True)
class MkrRecord:
    id: str
    positive_prompt: str
    negative_prompt: str
    gold_completion: str | None = None
    topk: tuple[tuple[str, float], ...] | None = None
    non_meaningful: bool | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "positive_prompt": self.positive_prompt,
            "negative_prompt": self.negative_prompt,
        }
        if self.gold_completion is not None:
            out["gold_completion"] = self.gold_completion
        if self.topk is not None:
            out["topk"] = [{"token": t, "prob": p} for t, p in self.topk]
        if self.non_meaningful is not None:
            out["non_meaningful"] = self.non_meaningful
        return out


def _iter_jsonl(path: Path, problems: list[str]):
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
            continue
        if not isinstance(obj, dict):
            problems.append(f"line {lineno}: record must be an object")
            continue
        yield lineno, obj


def _req_str(obj: dict, key: str, lineno: int, problems: list[str]) -> str | None:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        problems.append(f"line {lineno}: missing or empty {key!r}")
        return None
    return value


def _opt_str(obj: dict, key: str, lineno: int, problems: list[str]) -> str | None:
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        problems.append(f"line {lineno}: {key!r} must be a non-empty string")
        return None
    return value


def load_nli(path: str | Path) -> list[NliRecord]:
    problems: list[str] = []
    records: list[NliRecord] = []
    seen_ids: set[str] = set()
    for lineno, obj in _iter_jsonl(Path(path), problems):
        rid = _req_str(obj, "id", lineno, problems)
        context = _req_str(obj, "context", lineno, problems)
        hypothesis = _req_str(obj, "hypothesis", lineno, problems)
        label_space = obj.get("label_space")
        if label_space not in (2, 3):
            problems.append(f"line {lineno}: label_space must be 2 or 3")
            continue
        legal = _LABELS_3 if label_space == 3 else _LABELS_2
        labels = obj.get("labels")
        if not isinstance(labels, dict) or "c_h" not in labels:
            problems.append(f"line {lineno}: labels must be an object with at least 'c_h'")
            continue
        ok = True
        for key, value in labels.items():
            if key not in _PAIR_KEYS:
                problems.append(f"line {lineno}: unknown pair key {key!r}")
                ok = False
            elif value not in legal:
                problems.append(f"line {lineno}: illegal label {value!r} for {key!r}")
                ok = False
        negated = obj.get("negated_labels", {})
        if not isinstance(negated, dict):
            problems.append(f"line {lineno}: negated_labels must be an object")
            continue
        for key, value in negated.items():
            if key not in _NEG_KEYS:
                problems.append(f"line {lineno}: unknown configuration {key!r}")
                ok = False
            elif value not in legal:
                problems.append(f"line {lineno}: illegal label {value!r} for {key!r}")
                ok = False
        presupposed = _opt_str(obj, "presupposed", lineno, problems)
        scoped = _opt_str(obj, "scoped", lineno, problems)
        if (presupposed is None) != (scoped is None):
            problems.append(f"line {lineno}: presupposed and scoped must come together")
            ok = False
        if rid is None or context is None or hypothesis is None or not ok:
            continue
        if rid in seen_ids:
            problems.append(f"line {lineno}: duplicate id {rid!r}")
            continue
        seen_ids.add(rid)
        records.append(
            NliRecord(
                id=rid,
                context=context,
                hypothesis=hypothesis,
                label_space=label_space,
                labels={k: labels[k] for k in _PAIR_KEYS if k in labels},
                negated_labels={k: negated[k] for k in _NEG_KEYS if k in negated},
                presupposed=presupposed,
                scoped=scoped,
                negated_context=_opt_str(obj, "negated_context", lineno, problems),
                negated_hypothesis=_opt_str(obj, "negated_hypothesis", lineno, problems),
            )
        )
    if problems:
        raise DataFormatError(problems)
    return records


def load_qa(path: str | Path) -> list[QaRecord]:
    problems: list[str] = []
    records: list[QaRecord] = []
    seen_ids: set[str] = set()
    for lineno, obj in _iter_jsonl(Path(path), problems):
        rid = _req_str(obj, "id", lineno, problems)
        context = _req_str(obj, "context", lineno, problems)
        question = _req_str(obj, "question", lineno, problems)
        polarity = obj.get("polarity")
        if polarity not in ("positive", "negated"):
            problems.append(f"line {lineno}: polarity must be 'positive' or 'negated'")
            continue
        gold = obj.get("gold_answer")
        if gold not in ("Y", "N"):
            problems.append(f"line {lineno}: gold_answer must be 'Y' or 'N'")
            continue
        positive_context = _opt_str(obj, "positive_context", lineno, problems)
        if polarity == "negated" and positive_context is None:
            problems.append(f"line {lineno}: negated record needs positive_context")
            continue
        if rid is None or context is None or question is None:
            continue
        if rid in seen_ids:
            problems.append(f"line {lineno}: duplicate id {rid!r}")
            continue
        seen_ids.add(rid)
        records.append(
            QaRecord(
                id=rid,
                context=context,
                question=question,
                polarity=polarity,
                gold_answer=gold,
                positive_context=positive_context,
            )
        )
    if problems:
        raise DataFormatError(problems)
    return records


def load_mkr(path: str | Path) -> list[MkrRecord]:
    problems: list[str] = []
    records: list[MkrRecord] = []
    seen_ids: set[str] = set()
    for lineno, obj in _iter_jsonl(Path(path), problems):
        rid = _req_str(obj, "id", lineno, problems)
        pos = _req_str(obj, "positive_prompt", lineno, problems)
        neg = _req_str(obj, "negative_prompt", lineno, problems)
        ok = True
        for key, prompt in (("positive_prompt", pos), ("negative_prompt", neg)):
            if prompt is not None and prompt.count("[MASK]") != 1:
                problems.append(f"line {lineno}: {key!r} must contain exactly one [MASK]")
                ok = False
        topk = None
        if "topk" in obj:
            raw = obj["topk"]
            if not isinstance(raw, list) or not raw:
                problems.append(f"line {lineno}: topk must be a non-empty list")
                ok = False
            else:
                pairs: list[tuple[str, float]] = []
                for j, item in enumerate(raw):
                    if (
                        not isinstance(item, dict)
                        or not isinstance(item.get("token"), str)
                        or not isinstance(item.get("prob"), (int, float))
                        or not 0.0 <= float(item["prob"]) <= 1.0
                    ):
                        problems.append(f"line {lineno}: topk[{j}] needs token and prob in [0, 1]")
                        ok = False
                        break
                    pairs.append((item["token"], float(item["prob"])))
                else:
                    topk = tuple(pairs)
        non_meaningful = obj.get("non_meaningful")
        if non_meaningful is not None and not isinstance(non_meaningful, bool):
            problems.append(f"line {lineno}: non_meaningful must be a boolean")
            ok = False
        if rid is None or pos is None or neg is None or not ok:
            continue
        if rid in seen_ids:
            problems.append(f"line {lineno}: duplicate id {rid!r}")
            continue
        seen_ids.add(rid)
        records.append(
            MkrRecord(
                id=rid,
                positive_prompt=pos,
                negative_prompt=neg,
                gold_completion=_opt_str(obj, "gold_completion", lineno, problems),
                topk=topk,
                non_meaningful=non_meaningful,
            )
        )
    if problems:
        raise DataFormatError(problems)
    return records


def load_dataset(path: str | Path, kind: str):
    """Load a dataset by kind: 'nli', 'qa', 'mkr', or 'stringdist'."""
    if kind == "nli":
        return load_nli(path)
    if kind == "qa":
        return load_qa(path)
    if kind == "mkr":
        return load_mkr(path)
    if kind == "stringdist":
        from .audit import load_stringdist

        return load_stringdist(path)
    raise ValueError(f"unknown dataset kind {kind!r}")


def write_jsonl(records: Sequence, path: str | Path) -> None:
    lines = [json.dumps(r.to_dict(), sort_keys=True) for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


SYN_COLORS = ("red", "blue", "green", "yellow", "black", "white")

# (positive context, negated context, question) verbatim, color slot {c}
_SYN_SCHEMAS = (
    (
        "There was a {c} car.",
        "There was no {c} car.",
        "Was there a {c} car ?",
    ),
    (
        "John played with a {c} ball.",
        "John played with no {c} ball.",
        "Did john play with a {c} ball ?",
    ),
    (
        "The man was wearing a {c} shirt.",
        "The man was wearing no {c} shirt.",
        "Did the man wear a {c} shirt ?",
    ),
    (
        "The house had a {c} window.",
        "The house had no {c} window.",
        "Did the house have a {c} window ?",
    ),
    (
        "A {c} glass was on the table.",
        "No {c} glass was on the table.",
        "Was there a {c} glass on the table?",
    ),
)


def generate_syn() -> list[QaRecord]:
    """The 60-record synthetic yes/no set: 5 schemas x 6 colors x 2 polarities."""
    records: list[QaRecord] = []
    for polarity, tag in (("positive", "pos"), ("negated", "neg")):
        for i, (pos_tpl, neg_tpl, q_tpl) in enumerate(_SYN_SCHEMAS, start=1):
            for color in SYN_COLORS:
                positive = pos_tpl.format(c=color)
                context = positive if polarity == "positive" else neg_tpl.format(c=color)
                records.append(
                    QaRecord(
                        id=f"syn-{tag}-{i}-{color}",
                        context=context,
                        question=q_tpl.format(c=color),
                        polarity=polarity,
                        gold_answer="Y" if polarity == "positive" else "N",
                        positive_context=None if polarity == "positive" else positive,
                    )
                )
    return records


@dataclass(frozen=True)
class EvalReport:
    task: str
    mode: str
    accuracies: dict[str, Any]
    counts: dict[str, Any]
    coherence: dict[str, Any]
    provenance: dict[str, Any]
    records: list[dict[str, Any]]
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "task": self.task,
            "mode": self.mode,
            "accuracies": self.accuracies,
            "counts": self.counts,
            "coherence": self.coherence,
            "provenance": self.provenance,
            "records": self.records,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "EvalReport":
        problems = []
        if obj.get("schema_version") != SCHEMA_VERSION:
            problems.append(f"unsupported schema_version {obj.get('schema_version')!r}")
        for key in ("task", "mode", "accuracies", "counts", "coherence", "provenance", "records"):
            if key not in obj:
                problems.append(f"report missing {key!r}")
        if problems:
            raise DataFormatError(problems)
        return cls(
            task=obj["task"],
            mode=obj["mode"],
            accuracies=obj["accuracies"],
            counts=obj["counts"],
            coherence=obj["coherence"],
            provenance=obj["provenance"],
            records=obj["records"],
            schema_version=obj["schema_version"],
        )


def write_report(report: EvalReport, path: str | Path) -> None:
    """Canonical serialization: sorted keys, two-space indent, trailing newline."""
    text = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def read_report(path: str | Path) -> EvalReport:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError([f"invalid JSON: {exc.msg}"]) from None
    if not isinstance(obj, dict):
        raise DataFormatError(["report must be a JSON object"])
    return EvalReport.from_dict(obj)
