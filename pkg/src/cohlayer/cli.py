"""Command-line harness.

Verbs:

    eval-nli      label propagation over negated NLI configurations
    eval-qa       yes/no evaluation with complement answers on negated items
    eval-mkr      cloze reranking for negated prompts
    gen-syn       emit the synthetic yes/no dataset
    audit         incoherence audit of a string-distribution file
    eval-formula  evaluate one formula against an explicit base

Modes: `baseline` queries the model on the negated surface forms;
`lambda` computes negated answers from positive queries only;
`lambda_basic` (NLI, 3-label) treats the whole context as negation scope.

Exit codes: 0 success, 1 usage, 2 data format error, 3 provider error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from . import adapters, datasets, nli, providers
from .audit import DEFAULT_EPSILON, audit as run_audit, dutch_book_margin, load_stringdist
from .errors import (
    CohlayerError,
    DataFormatError,
    MissingLabelError,
    ParseError,
    ProviderError,
)
from .evaluator import Evaluator
from .nli import Label2, Label3, PairLabels

__all__ = ["RunConfig", "run_eval", "eval_formula", "main"]

MODES = ("baseline", "lambda", "lambda_basic")


@dataclass(frozen=True)
class RunConfig:
    task: str
    data: str
    mode: str = "lambda"
    labels: int = 3
    k: int = 5
    epsilon: float = DEFAULT_EPSILON
    provider: str | None = None
    out: str | None = None
    parallel: int = 1
    alt_source: str = "positive"
    n_branch_source: str = "h_c"
    cache: bool = True
    created_at: str | None = None

    def __post_init__(self):
        if self.task not in ("nli", "qa", "mkr"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.labels not in (2, 3):
            raise ValueError("labels must be 2 or 3")
        if self.mode == "lambda_basic" and (self.task != "nli" or self.labels != 3):
            raise ValueError("lambda_basic applies to 3-label NLI only")
        if self.parallel < 1:
            raise ValueError("parallel must be at least 1")
        if self.alt_source not in ("positive", "negative"):
            raise ValueError("alt_source must be 'positive' or 'negative'")

    def config_hash(self) -> str:
        stable = {
            "task": self.task,
            "data": self.data,
            "mode": self.mode,
            "labels": self.labels,
            "k": self.k,
            "epsilon": self.epsilon,
            "provider": self.provider,
            "alt_source": self.alt_source,
            "n_branch_source": self.n_branch_source,
        }
        return hashlib.sha256(json.dumps(stable, sort_keys=True).encode()).hexdigest()


def _provenance(cfg: RunConfig, model: str | None) -> dict[str, Any]:
    return {
        "provider": cfg.provider if cfg.provider else "records",
        "model": model,
        "config_hash": cfg.config_hash(),
        "created_at": cfg.created_at,
    }


def _map_records(records: Sequence, worker: Callable, parallel: int) -> list:
    """Apply worker to each record; output order follows input order."""
    if parallel <= 1:
        return [worker(r) for r in records]
    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(worker, records))


# ---------------------------------------------------------------------------
# NLI


def _parse_label(value: str, labels: int) -> Label2 | Label3:
    return Label3(value) if labels == 3 else Label2(value)


def _record_pair_labels(record: datasets.NliRecord, labels: int) -> PairLabels:
    parsed = {
        key: _parse_label(value, labels) for key, value in record.labels.items()
    }
    return PairLabels(
        c_h=parsed.get("c_h"),
        p_h=parsed.get("p_h"),
        h_c=parsed.get("h_c"),
        h_cprime=parsed.get("h_cprime"),
    )


def _provider_pair_labels(
    record: datasets.NliRecord, provider: providers.Provider, labels: int
) -> PairLabels:
    def ask(premise: str, hypothesis: str):
        response = provider.get(providers.PredictionRequest.nli(premise, hypothesis))
        return response.label3() if labels == 3 else response.label2()

    p_h = None
    h_cprime = None
    if record.presupposed is not None and record.scoped is not None:
        p_h = ask(record.presupposed, record.hypothesis)
        h_cprime = ask(record.hypothesis, record.scoped)
    return PairLabels(
        c_h=ask(record.context, record.hypothesis),
        p_h=p_h,
        h_c=ask(record.hypothesis, record.context),
        h_cprime=h_cprime,
    )


def _nli_lambda_predictions(
    pair: PairLabels, scoped: bool, cfg: RunConfig
) -> dict[str, nli.ConfigPrediction]:
    if cfg.labels == 3:
        if cfg.mode == "lambda_basic" or not scoped:
            return nli.snli_basic(pair, n_branch_source=cfg.n_branch_source)
        return nli.snli_scoped(pair, n_branch_source=cfg.n_branch_source)
    unscoped = nli.rte_unscoped(pair)
    out = {"c_nh": unscoped["c_nh"]}
    if scoped and pair.h_cprime is not None:
        out.update(nli.rte_scoped(pair))
    else:
        out["nc_h"] = unscoped["nc_h"]
        out["nc_nh"] = unscoped["nc_nh"]
    return out


def _nli_baseline_predictions(
    record: datasets.NliRecord, provider: providers.Provider, labels: int
) -> dict[str, nli.ConfigPrediction]:
    if record.negated_context is None or record.negated_hypothesis is None:
        raise MissingLabelError("baseline needs negated_context and negated_hypothesis")

    def ask(premise: str, hypothesis: str):
        response = provider.get(providers.PredictionRequest.nli(premise, hypothesis))
        return response.label3() if labels == 3 else response.label2()

    pairs = {
        "c_nh": (record.context, record.negated_hypothesis),
        "nc_h": (record.negated_context, record.hypothesis),
        "nc_nh": (record.negated_context, record.negated_hypothesis),
    }
    return {
        config: nli.ConfigPrediction(config, ask(premise, hypothesis), determined=True)
        for config, (premise, hypothesis) in pairs.items()
    }


def _eval_nli(cfg: RunConfig, provider: providers.Provider | None) -> datasets.EvalReport:
    records = datasets.load_nli(cfg.data)
    bad_space = [r.id for r in records if r.label_space != cfg.labels]
    if bad_space:
        raise DataFormatError(
            [f"record {rid} has a different label_space than --labels {cfg.labels}" for rid in bad_space]
        )
    if cfg.mode == "baseline" and provider is None:
        raise ProviderError("baseline mode needs --provider")

    def worker(record: datasets.NliRecord) -> dict[str, Any]:
        row: dict[str, Any] = {"id": record.id, "skipped": False, "predictions": {}}
        try:
            if cfg.mode == "baseline":
                assert provider is not None
                predictions = _nli_baseline_predictions(record, provider, cfg.labels)
            else:
                pair = (
                    _provider_pair_labels(record, provider, cfg.labels)
                    if provider is not None
                    else _record_pair_labels(record, cfg.labels)
                )
                scoped = record.presupposed is not None
                predictions = _nli_lambda_predictions(pair, scoped, cfg)
        except MissingLabelError as exc:
            row["skipped"] = True
            row["reason"] = str(exc)
            return row
        for config, prediction in predictions.items():
            gold = record.negated_labels.get(config)
            entry: dict[str, Any] = {
                "label": prediction.label.value,
                "determined": prediction.determined,
                "gold": gold,
                "correct": None if gold is None else prediction.label.value == gold,
            }
            row["predictions"][config] = entry
        return row

    rows = _map_records(records, worker, cfg.parallel)

    configs = ("c_nh", "nc_h", "nc_nh")
    counts: dict[str, Any] = {"total": len(records), "skipped": sum(r["skipped"] for r in rows)}
    accuracies: dict[str, Any] = {}
    per_config: dict[str, Any] = {}
    means: list[float] = []
    for config in configs:
        determined = defaulted = with_gold = correct = 0
        for row in rows:
            if row["skipped"] or config not in row["predictions"]:
                continue
            entry = row["predictions"][config]
            if entry["determined"]:
                determined += 1
            else:
                defaulted += 1
            if entry["gold"] is not None:
                with_gold += 1
                if entry["correct"]:
                    correct += 1
        skipped = counts["skipped"] + sum(
            1 for row in rows if not row["skipped"] and config not in row["predictions"]
        )
        per_config[config] = {
            "determined": determined,
            "defaulted": defaulted,
            "skipped": skipped,
            "total": len(records),
            "with_gold": with_gold,
            "correct": correct,
        }
        if with_gold:
            accuracy = correct / with_gold
            accuracies[config] = accuracy
            means.append(accuracy)
        else:
            accuracies[config] = None
    accuracies["full"] = sum(means) / len(means) if means else None
    counts["per_config"] = per_config

    model = getattr(getattr(provider, "inner", provider), "model", None) if provider else None
    return datasets.EvalReport(
        task="nli",
        mode=cfg.mode,
        accuracies=accuracies,
        counts=counts,
        coherence={},
        provenance=_provenance(cfg, model),
        records=rows,
    )


# ---------------------------------------------------------------------------
# QA


def _eval_qa(cfg: RunConfig, provider: providers.Provider | None) -> datasets.EvalReport:
    if provider is None:
        raise ProviderError("eval-qa needs --provider")
    records = datasets.load_qa(cfg.data)

    def worker(record: datasets.QaRecord) -> dict[str, Any]:
        if cfg.mode == "baseline":
            response = provider.get(
                providers.PredictionRequest.qa(record.question, record.context)
            )
            yes = response.yes_prob()
            answer, prob = ("Y", yes) if yes > 0.5 else ("N", 1.0 - yes)
        else:
            positive = (
                record.context if record.polarity == "positive" else record.positive_context
            )
            assert positive is not None  # loader guarantees it for negated records
            response = provider.get(providers.PredictionRequest.qa(record.question, positive))
            query = adapters.QAQuery(
                question_id=record.id,
                polarity=record.polarity,
                base_yes_prob=response.yes_prob(),
            )
            answer, prob = adapters.qa_answer(query)
        pair = adapters.AltDistribution.of(
            (("yes", prob if answer == "Y" else 1.0 - prob), ("no", prob if answer == "N" else 1.0 - prob))
        )
        return {
            "id": record.id,
            "polarity": record.polarity,
            "answer": answer,
            "prob": prob,
            "gold": record.gold_answer,
            "correct": answer == record.gold_answer,
            "margin": dutch_book_margin(pair),
        }

    rows = _map_records(records, worker, cfg.parallel)

    accuracies: dict[str, Any] = {}
    for polarity in ("positive", "negated"):
        subset = [r for r in rows if r["polarity"] == polarity]
        accuracies[polarity] = (
            sum(r["correct"] for r in subset) / len(subset) if subset else None
        )
    accuracies["overall"] = sum(r["correct"] for r in rows) / len(rows) if rows else None

    # complementarity: a negated record and its positive twin must flip
    by_key = {
        (r.question, r.context): row
        for r, row in zip(records, rows)
        if r.polarity == "positive"
    }
    pairs = checked = 0
    for record, row in zip(records, rows):
        if record.polarity != "negated" or record.positive_context is None:
            continue
        twin = by_key.get((record.question, record.positive_context))
        if twin is None:
            continue
        checked += 1
        if row["answer"] != twin["answer"]:
            pairs += 1
    counts = {
        "total": len(records),
        "skipped": 0,
        "determined": len(rows),
        "defaulted": 0,
        "complementary_pairs": pairs,
        "complementary_checked": checked,
    }
    coherence = {
        "max_dutch_book_margin": max((r["margin"] for r in rows), default=0.0),
    }
    model = getattr(getattr(provider, "inner", provider), "model", None)
    return datasets.EvalReport(
        task="qa",
        mode=cfg.mode,
        accuracies=accuracies,
        counts=counts,
        coherence=coherence,
        provenance=_provenance(cfg, model),
        records=rows,
    )


# ---------------------------------------------------------------------------
# MKR


def _eval_mkr(cfg: RunConfig, provider: providers.Provider | None) -> datasets.EvalReport:
    records = datasets.load_mkr(cfg.data)

    def alternatives_for(record: datasets.MkrRecord) -> adapters.AltDistribution:
        if record.topk is not None and cfg.alt_source == "positive":
            return adapters.AltDistribution.of(record.topk)
        if provider is None:
            raise ProviderError(f"record {record.id} has no inline topk; --provider required")
        prompt = (
            record.positive_prompt if cfg.alt_source == "positive" else record.negative_prompt
        )
        response = provider.get(providers.PredictionRequest.fill_mask(prompt, cfg.k))
        return response.distribution

    def worker(record: datasets.MkrRecord) -> dict[str, Any]:
        alts = alternatives_for(record)
        positive_argmax = alts.argmax()
        if cfg.mode == "baseline":
            if provider is None:
                raise ProviderError("baseline mode needs --provider")
            response = provider.get(
                providers.PredictionRequest.fill_mask(record.negative_prompt, cfg.k)
            )
            selection = response.distribution.argmax()
            flipped = None
            renorm_total = None
        else:
            result = adapters.mkr_rerank(alts, cfg.k)
            selection = result.selection
            flipped = [[t, p] for t, p in result.flipped.alternatives]
            renorm_total = result.flipped_renormalized.total()
        row: dict[str, Any] = {
            "id": record.id,
            "positive_argmax": positive_argmax,
            "selection": selection,
            "em": selection == positive_argmax,
            "flipped": flipped,
            "renormalized_total": renorm_total,
            "non_meaningful": record.non_meaningful,
        }
        if record.gold_completion is not None:
            row["gold_completion"] = record.gold_completion
            row["gold_match"] = selection == record.gold_completion
        return row

    rows = _map_records(records, worker, cfg.parallel)
    em_count = sum(r["em"] for r in rows)
    annotated = [r["non_meaningful"] for r in rows if r["non_meaningful"] is not None]
    gold_rows = [r for r in rows if "gold_match" in r]
    counts = {
        "total": len(records),
        "skipped": 0,
        "determined": len(rows),
        "defaulted": 0,
        "em": em_count,
        "non_meaningful": sum(annotated) if annotated else None,
    }
    accuracies = {
        "em_rate": em_count / len(rows) if rows else None,
        "gold_accuracy": (
            sum(r["gold_match"] for r in gold_rows) / len(gold_rows) if gold_rows else None
        ),
    }
    coherence = {
        "max_renormalization_error": max(
            (abs(1.0 - r["renormalized_total"]) for r in rows if r["renormalized_total"] is not None),
            default=0.0,
        ),
    }
    model = getattr(getattr(provider, "inner", provider), "model", None) if provider else None
    return datasets.EvalReport(
        task="mkr",
        mode=cfg.mode,
        accuracies=accuracies,
        counts=counts,
        coherence=coherence,
        provenance=_provenance(cfg, model),
        records=rows,
    )


def run_eval(cfg: RunConfig) -> datasets.EvalReport:
    """Run one evaluation; writes the report when cfg.out is set."""
    provider = providers.make_provider(cfg.provider, cache=cfg.cache) if cfg.provider else None
    if cfg.task == "nli":
        report = _eval_nli(cfg, provider)
    elif cfg.task == "qa":
        report = _eval_qa(cfg, provider)
    else:
        report = _eval_mkr(cfg, provider)
    if cfg.out:
        datasets.write_report(report, cfg.out)
    return report


# ---------------------------------------------------------------------------
# eval-formula


@dataclass(frozen=True)
class _IndependentBase:
    """Independent base: every atom keeps its marginal in any positive context."""

    marginals: dict[str, float] = field(default_factory=dict)

    def prob(self, atom: str, context: tuple[str, ...]) -> float:
        if atom not in self.marginals:
            raise ValueError(f"no --assign for atom {atom!r}")
        return self.marginals[atom]


def eval_formula(
    formula: str,
    assignments: dict[str, float],
    contexts: Sequence[str] = (),
    on_incoherent: str = "raise",
) -> float:
    ev = Evaluator(_IndependentBase(dict(assignments)), on_incoherent=on_incoherent)
    return ev.evaluate(formula, list(contexts))


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="cohlayer", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p: _Parser):
        p.add_argument("--data", required=True, help="dataset path (JSONL)")
        p.add_argument("--provider", help="fixture:<path> or an http(s) URL")
        p.add_argument("--mode", choices=MODES, default="lambda")
        p.add_argument("--out", help="write the JSON report here")
        p.add_argument("--parallel", type=int, default=1)
        p.add_argument("--no-cache", action="store_true", help="disable provider caching")

    p_nli = sub.add_parser("eval-nli", help="evaluate negated NLI configurations")
    add_common(p_nli)
    p_nli.add_argument("--labels", type=int, choices=(2, 3), default=3)
    p_nli.add_argument(
        "--n-branch-source",
        choices=("h_c", "h_cprime"),
        default="h_c",
        help="which reverse label the neutral-context branch consults",
    )

    p_qa = sub.add_parser("eval-qa", help="evaluate yes/no records")
    add_common(p_qa)

    p_mkr = sub.add_parser("eval-mkr", help="evaluate cloze reranking")
    add_common(p_mkr)
    p_mkr.add_argument("--k", type=int, default=5)
    p_mkr.add_argument(
        "--alt-source",
        choices=("positive", "negative"),
        default="positive",
        help="which prompt supplies the alternative set",
    )

    p_syn = sub.add_parser("gen-syn", help="emit the synthetic yes/no dataset")
    p_syn.add_argument("--out", help="write JSONL here instead of stdout")

    p_audit = sub.add_parser("audit", help="audit a string-distribution file")
    p_audit.add_argument("--data", required=True, help="stringdist file")
    p_audit.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p_audit.add_argument("--out", help="write the JSON report here")

    p_f = sub.add_parser("eval-formula", help="evaluate a formula")
    p_f.add_argument("formula")
    p_f.add_argument(
        "--assign",
        action="append",
        default=[],
        metavar="ATOM=P",
        help="marginal probability for an atom (repeatable)",
    )
    p_f.add_argument("--ctx", action="append", default=[], help="context formula (repeatable)")
    p_f.add_argument("--on-incoherent", choices=("raise", "clamp"), default="raise")
    return parser


def _cmd_eval(args: argparse.Namespace, task: str) -> int:
    cfg = RunConfig(
        task=task,
        data=args.data,
        mode=args.mode,
        labels=getattr(args, "labels", 3),
        k=getattr(args, "k", 5),
        provider=args.provider,
        out=args.out,
        parallel=args.parallel,
        alt_source=getattr(args, "alt_source", "positive"),
        n_branch_source=getattr(args, "n_branch_source", "h_c"),
        cache=not args.no_cache,
    )
    report = run_eval(cfg)
    summary = {
        "task": report.task,
        "mode": report.mode,
        "accuracies": report.accuracies,
        "counts": {k: v for k, v in report.counts.items() if k != "per_config"},
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_gen_syn(args: argparse.Namespace) -> int:
    records = datasets.generate_syn()
    if args.out:
        datasets.write_jsonl(records, args.out)
    else:
        for record in records:
            print(json.dumps(record.to_dict(), sort_keys=True))
    return 0


def _cmd_audit(args: argparse.Namespace) -> int:
    dist = load_stringdist(args.data)
    report = run_audit(dist, epsilon=args.epsilon)
    text = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")
    return 0


def _cmd_eval_formula(args: argparse.Namespace) -> int:
    assignments: dict[str, float] = {}
    for item in args.assign:
        if "=" not in item:
            raise ValueError(f"--assign needs ATOM=P, got {item!r}")
        name, _, raw = item.partition("=")
        assignments[name.strip()] = float(raw)
    value = eval_formula(
        args.formula, assignments, args.ctx, on_incoherent=args.on_incoherent
    )
    print(repr(value))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "eval-nli":
            return _cmd_eval(args, "nli")
        if args.verb == "eval-qa":
            return _cmd_eval(args, "qa")
        if args.verb == "eval-mkr":
            return _cmd_eval(args, "mkr")
        if args.verb == "gen-syn":
            return _cmd_gen_syn(args)
        if args.verb == "audit":
            return _cmd_audit(args)
        if args.verb == "eval-formula":
            return _cmd_eval_formula(args)
        parser.error(f"unknown verb {args.verb!r}")
        return 1
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, ValueError, MissingLabelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CohlayerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
