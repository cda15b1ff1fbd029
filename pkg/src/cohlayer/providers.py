"""Prediction providers speaking the probe wire protocol.

Three POST endpoints and a health check:

    POST /v1/nli        {"premise": s, "hypothesis": s}
                        -> {"model": m, "probs": {"entailment": p,
                            "contradiction": p, "neutral": p}}
    POST /v1/fill_mask  {"text": s, "k": n}
                        -> {"model": m, "candidates": [{"token": t,
                            "prob": p}, ...]}  descending by prob
    POST /v1/qa         {"question": s, "context": s}
                        -> {"model": m, "probs": {"yes": p, "no": p}}
    GET  /healthz       -> {"status": "ok"}

A fixture provider serves canned responses from a JSON file with the same
payload shapes; a remote provider talks to a live service. Both validate
every response against the distribution invariants before handing it
over: nli and qa probabilities must sum to 1 within 1e-6, fill_mask
candidates must be descending with total mass at most 1. Remote calls
retry transport failures and 503 (model still loading) with exponential
backoff; invariant violations and other HTTP errors never retry.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from .adapters import AltDistribution
from .errors import FixtureMissError, InvariantViolationError, ProviderError
from .nli import Label2, Label3, to_label2

__all__ = [
    "PredictionRequest",
    "PredictionResponse",
    "Provider",
    "FixtureProvider",
    "RemoteProvider",
    "CachingProvider",
    "make_provider",
    "validate_payload",
    "NLI_LABELS",
    "QA_LABELS",
]

logger = logging.getLogger(__name__)

NLI_LABELS = ("entailment", "contradiction", "neutral")
QA_LABELS = ("yes", "no")

PROB_TOL = 1e-6
TASKS = ("nli", "fill_mask", "qa")


@dataclass(frozen=True)
class PredictionRequest:
    task: str
    payload: dict

    @classmethod
    def nli(cls, premise: str, hypothesis: str) -> "PredictionRequest":
        return cls("nli", {"premise": premise, "hypothesis": hypothesis})

    @classmethod
    def fill_mask(cls, text: str, k: int) -> "PredictionRequest":
        if k < 1:
            raise ProviderError(f"k must be at least 1, got {k}")
        return cls("fill_mask", {"text": text, "k": k})

    @classmethod
    def qa(cls, question: str, context: str) -> "PredictionRequest":
        return cls("qa", {"question": question, "context": context})

    def content_key(self) -> str:
        blob = json.dumps({"task": self.task, "payload": self.payload}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def _check_probs(obj: dict, labels: tuple[str, ...], where: str) -> None:
    probs = obj.get("probs")
    if not isinstance(probs, dict) or set(probs) != set(labels):
        raise InvariantViolationError(f"{where}: probs must have exactly keys {labels}")
    total = 0.0
    for key in labels:
        v = probs[key]
        if not isinstance(v, (int, float)) or not 0.0 <= float(v) <= 1.0:
            raise InvariantViolationError(f"{where}: prob {key}={v!r} outside [0, 1]")
        total += float(v)
    if abs(total - 1.0) > PROB_TOL:
        raise InvariantViolationError(f"{where}: probs sum to {total}, expected 1 +/- {PROB_TOL}")


def validate_payload(task: str, obj: dict, k: int | None = None) -> None:
    """Check a response body against the wire invariants; raises on violation."""
    if not isinstance(obj, dict):
        raise InvariantViolationError(f"{task}: response must be an object")
    if task == "nli":
        _check_probs(obj, NLI_LABELS, "nli")
    elif task == "qa":
        _check_probs(obj, QA_LABELS, "qa")
    elif task == "fill_mask":
        candidates = obj.get("candidates")
        if not isinstance(candidates, list) or not candidates:
            raise InvariantViolationError("fill_mask: candidates must be a non-empty list")
        if k is not None and len(candidates) > k:
            raise InvariantViolationError(
                f"fill_mask: {len(candidates)} candidates for k={k}"
            )
        total = 0.0
        prev = 1.0
        tokens: set[str] = set()
        for i, item in enumerate(candidates):
            if not isinstance(item, dict) or not isinstance(item.get("token"), str):
                raise InvariantViolationError(f"fill_mask: candidates[{i}] needs a token")
            p = item.get("prob")
            if not isinstance(p, (int, float)) or not 0.0 <= float(p) <= 1.0:
                raise InvariantViolationError(f"fill_mask: candidates[{i}] prob outside [0, 1]")
            p = float(p)
            if p > prev + 1e-12:
                raise InvariantViolationError("fill_mask: candidates not in descending order")
            if item["token"] in tokens:
                raise InvariantViolationError(f"fill_mask: duplicate token {item['token']!r}")
            tokens.add(item["token"])
            prev = p
            total += p
        if total > 1.0 + PROB_TOL:
            raise InvariantViolationError(f"fill_mask: top-k mass {total} exceeds 1")
    else:
        raise InvariantViolationError(f"unknown task {task!r}")


@dataclass(frozen=True)
class PredictionResponse:
    task: str
    model: str
    distribution: AltDistribution
    raw: dict = field(default_factory=dict, compare=False)

    def label3(self) -> Label3:
        return Label3(self.distribution.argmax())

    def label2(self) -> Label2:
        return to_label2(self.label3())

    def yes_prob(self) -> float:
        return self.distribution.prob("yes")

    def as_distribution(self) -> AltDistribution:
        """Normalized view; fill_mask mass gets renormalized with a log note."""
        if self.distribution.normalized:
            return self.distribution
        total = self.distribution.total()
        if abs(total - 1.0) > PROB_TOL:
            logger.info(
                "renormalizing %s top-k mass %.6f to 1", self.task, total
            )
        return self.distribution.renormalized()


def _build_response(task: str, obj: dict, default_model: str) -> PredictionResponse:
    model = obj.get("model") if isinstance(obj.get("model"), str) else default_model
    if task == "nli":
        dist = AltDistribution.of(
            ((label, float(obj["probs"][label])) for label in NLI_LABELS), normalized=True
        )
    elif task == "qa":
        dist = AltDistribution.of(
            ((label, float(obj["probs"][label])) for label in QA_LABELS), normalized=True
        )
    else:
        dist = AltDistribution.of(
            ((c["token"], float(c["prob"])) for c in obj["candidates"]), normalized=False
        )
    return PredictionResponse(task=task, model=model, distribution=dist, raw=obj)


class Provider(Protocol):
    def get(self, request: PredictionRequest) -> PredictionResponse: ...


class FixtureProvider:
    """Serves canned responses from a JSON fixture file.

    File shape: {"model": str, "nli": [...], "fill_mask": [...], "qa": [...]}
    with entries carrying the request fields next to the response fields.
    Requests with no matching entry raise FixtureMissError. Every request
    is appended to query_log, so tests can assert what was asked.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            data = json.loads(self.path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ProviderError(f"fixture {self.path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ProviderError(f"fixture {self.path}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise ProviderError(f"fixture {self.path}: must be a JSON object")
        self.model = data.get("model", "fixture")
        self._nli: dict[tuple[str, str], dict] = {}
        self._fill: dict[str, dict] = {}
        self._qa: dict[tuple[str, str], dict] = {}
        for entry in data.get("nli", ()):
            validate_payload("nli", entry)
            self._nli[(entry["premise"], entry["hypothesis"])] = entry
        for entry in data.get("fill_mask", ()):
            validate_payload("fill_mask", entry)
            self._fill[entry["text"]] = entry
        for entry in data.get("qa", ()):
            validate_payload("qa", entry)
            self._qa[(entry["question"], entry["context"])] = entry
        self.query_log: list[PredictionRequest] = []

    def get(self, request: PredictionRequest) -> PredictionResponse:
        self.query_log.append(request)
        p = request.payload
        if request.task == "nli":
            entry = self._nli.get((p["premise"], p["hypothesis"]))
        elif request.task == "qa":
            entry = self._qa.get((p["question"], p["context"]))
        elif request.task == "fill_mask":
            entry = self._fill.get(p["text"])
            if entry is not None:
                entry = dict(entry, candidates=entry["candidates"][: p["k"]])
        else:
            raise ProviderError(f"unknown task {request.task!r}")
        if entry is None:
            raise FixtureMissError(
                f"fixture {self.path.name} has no {request.task} entry for {p!r}"
            )
        return _build_response(request.task, entry, self.model)


class RemoteProvider:
    """Talks to a live probe service over HTTP.

    Transport failures and 503 retry with exponential backoff (default 3
    attempts); anything else fails fast. Concurrent use is bounded by a
    semaphore so a parallel harness cannot flood the service.
    """

    def __init__(
        self,
        base_url: str,
        retries: int = 3,
        backoff: float = 0.25,
        timeout: float = 30.0,
        max_in_flight: int = 4,
    ):
        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._gate = threading.Semaphore(max_in_flight)
        self._session = requests.Session()

    def health(self) -> bool:
        try:
            r = self._session.get(f"{self.base_url}/healthz", timeout=self.timeout)
            return r.status_code == 200
        except requests.RequestException:
            return False

    def get(self, request: PredictionRequest) -> PredictionResponse:
        url = f"{self.base_url}/v1/{request.task}"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    r = self._session.post(url, json=request.payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                logger.warning("transport error on %s (attempt %d): %s", url, attempt + 1, exc)
                continue
            if r.status_code == 503:
                last_error = ProviderError(f"{url} -> 503 (still loading)")
                logger.info("%s not ready (attempt %d)", url, attempt + 1)
                continue
            if r.status_code != 200:
                raise ProviderError(f"{url} -> HTTP {r.status_code}: {r.text[:200]}")
            try:
                obj = r.json()
            except ValueError:
                raise ProviderError(f"{url} -> non-JSON body") from None
            k = request.payload.get("k") if request.task == "fill_mask" else None
            validate_payload(request.task, obj, k=k)
            return _build_response(request.task, obj, "remote")
        raise ProviderError(f"{url} failed after {self.retries + 1} attempts: {last_error}")


class CachingProvider:
    """Content-hash cache in front of any provider; safe under threads."""

    def __init__(self, inner: Provider):
        self.inner = inner
        self._cache: dict[str, PredictionResponse] = {}
        self._lock = threading.Lock()

    def get(self, request: PredictionRequest) -> PredictionResponse:
        key = request.content_key()
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        response = self.inner.get(request)
        with self._lock:
            self._cache[key] = response
        return response


def make_provider(spec: str, cache: bool = True) -> Provider:
    """Build a provider from a CLI spec: fixture:<path> or http(s) URL."""
    if spec.startswith("fixture:"):
        provider: Provider = FixtureProvider(spec[len("fixture:"):])
    elif spec.startswith(("http://", "https://")):
        provider = RemoteProvider(spec)
    elif spec.startswith("http:"):
        provider = RemoteProvider("http://" + spec[len("http:"):].lstrip("/"))
    else:
        raise ProviderError(f"provider spec must be fixture:<path> or an http(s) URL, got {spec!r}")
    return CachingProvider(provider) if cache else provider
