"""Fixture and remote providers, payload validation, caching."""

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from cohlayer.datasets import fixture_path
from cohlayer.errors import FixtureMissError, InvariantViolationError, ProviderError
from cohlayer.nli import Label2, Label3
from cohlayer.providers import (
    CachingProvider,
    FixtureProvider,
    PredictionRequest,
    RemoteProvider,
    make_provider,
    validate_payload,
)

NLI_OK = {
    "model": "stub",
    "probs": {"entailment": 0.7, "contradiction": 0.2, "neutral": 0.1},
}


def test_request_constructors_and_content_key():
    a = PredictionRequest.nli("p", "h")
    b = PredictionRequest.nli("p", "h")
    c = PredictionRequest.nli("p", "h2")
    assert a.content_key() == b.content_key()
    assert a.content_key() != c.content_key()
    assert len(a.content_key()) == 64
    fm = PredictionRequest.fill_mask("x [MASK]", 5)
    assert fm.payload == {"text": "x [MASK]", "k": 5}
    assert PredictionRequest.qa("q?", "ctx").task == "qa"
    with pytest.raises(ProviderError, match="at least 1"):
        PredictionRequest.fill_mask("x", 0)
    # task participates in the key
    assert (
        PredictionRequest("nli", {"a": 1}).content_key()
        != PredictionRequest("qa", {"a": 1}).content_key()
    )


def test_validate_payload_nli_and_qa():
    validate_payload("nli", NLI_OK)
    validate_payload("qa", {"probs": {"yes": 0.5, "no": 0.5}})
    with pytest.raises(InvariantViolationError, match="exactly keys"):
        validate_payload("nli", {"probs": {"entailment": 1.0}})
    with pytest.raises(InvariantViolationError, match="sum to"):
        validate_payload("qa", {"probs": {"yes": 0.6, "no": 0.6}})
    with pytest.raises(InvariantViolationError, match="outside"):
        validate_payload("qa", {"probs": {"yes": -0.1, "no": 1.1}})
    with pytest.raises(InvariantViolationError, match="must be an object"):
        validate_payload("nli", [1])
    with pytest.raises(InvariantViolationError, match="unknown task"):
        validate_payload("mask", {})
    # a 1e-7 wobble is within tolerance
    validate_payload("qa", {"probs": {"yes": 0.5000001, "no": 0.5}})


def fm(cands):
    return {"candidates": [{"token": t, "prob": p} for t, p in cands]}


def test_validate_payload_fill_mask():
    validate_payload("fill_mask", fm([("a", 0.5), ("b", 0.3), ("c", 0.2)]))
    # ties are fine; order violations are not
    validate_payload("fill_mask", fm([("a", 0.4), ("b", 0.4)]))
    with pytest.raises(InvariantViolationError, match="descending"):
        validate_payload("fill_mask", fm([("a", 0.3), ("b", 0.5)]))
    with pytest.raises(InvariantViolationError, match="duplicate token"):
        validate_payload("fill_mask", fm([("a", 0.5), ("a", 0.3)]))
    with pytest.raises(InvariantViolationError, match="exceeds 1"):
        validate_payload("fill_mask", fm([("a", 0.8), ("b", 0.7)]))
    with pytest.raises(InvariantViolationError, match="non-empty list"):
        validate_payload("fill_mask", {"candidates": []})
    with pytest.raises(InvariantViolationError, match="needs a token"):
        validate_payload("fill_mask", {"candidates": [{"prob": 0.5}]})
    with pytest.raises(InvariantViolationError, match="for k=2"):
        validate_payload("fill_mask", fm([("a", 0.5), ("b", 0.3), ("c", 0.2)]), k=2)
    validate_payload("fill_mask", fm([("a", 0.5), ("b", 0.3)]), k=2)


def test_fixture_provider_nli_round_trip():
    path = fixture_path("nli_demo_provider.json")
    provider = FixtureProvider(path)
    entry = json.loads(path.read_text(encoding="utf-8"))["nli"][0]
    request = PredictionRequest.nli(entry["premise"], entry["hypothesis"])
    first = provider.get(request)
    second = provider.get(request)
    assert first == second
    assert first.model == provider.model
    assert isinstance(first.label3(), Label3)
    assert isinstance(first.label2(), Label2)
    top = max(entry["probs"], key=entry["probs"].get)
    assert first.label3().value == top
    assert provider.query_log == [request, request]


def test_fixture_provider_slices_top_k():
    provider = FixtureProvider(fixture_path("cloze_provider.json"))
    text = json.loads(fixture_path("cloze_provider.json").read_text(encoding="utf-8"))[
        "fill_mask"
    ][2]["text"]
    full = provider.get(PredictionRequest.fill_mask(text, 5))
    assert len(full.distribution.alternatives) == 5
    cut = provider.get(PredictionRequest.fill_mask(text, 2))
    assert len(cut.distribution.alternatives) == 2
    assert cut.distribution.alternatives == full.distribution.alternatives[:2]
    # sliced mass gets renormalized on demand
    normalized = cut.as_distribution()
    assert normalized.total() == pytest.approx(1.0)


def test_fixture_provider_miss_and_bad_files(tmp_path):
    provider = FixtureProvider(fixture_path("qa_syn_provider.json"))
    with pytest.raises(FixtureMissError, match="no qa entry"):
        provider.get(PredictionRequest.qa("Was there a purple car ?", "nope"))
    with pytest.raises(ProviderError, match="fixture"):
        FixtureProvider(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(ProviderError, match="invalid JSON"):
        FixtureProvider(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[]", encoding="utf-8")
    with pytest.raises(ProviderError, match="JSON object"):
        FixtureProvider(arr)
    # entries are validated at load time
    invalid = tmp_path / "invalid.json"
    invalid.write_text(
        json.dumps({"nli": [{"premise": "p", "hypothesis": "h", "probs": {"entailment": 2.0}}]}),
        encoding="utf-8",
    )
    with pytest.raises(InvariantViolationError):
        FixtureProvider(invalid)


def test_response_renormalization_logs(caplog):
    provider = FixtureProvider(fixture_path("cloze_provider.json"))
    text = json.loads(fixture_path("cloze_provider.json").read_text(encoding="utf-8"))[
        "fill_mask"
    ][2]["text"]
    response = provider.get(PredictionRequest.fill_mask(text, 3))
    with caplog.at_level(logging.INFO, logger="cohlayer.providers"):
        response.as_distribution()
    assert any("renormalizing" in r.message for r in caplog.records)


class CountingProvider:
    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def get(self, request):
        self.calls += 1
        return self.inner.get(request)


def test_caching_provider_dedupes():
    path = fixture_path("qa_syn_provider.json")
    entry = json.loads(path.read_text(encoding="utf-8"))["qa"][0]
    counter = CountingProvider(FixtureProvider(path))
    cached = CachingProvider(counter)
    request = PredictionRequest.qa(entry["question"], entry["context"])
    r1 = cached.get(request)
    r2 = cached.get(PredictionRequest.qa(entry["question"], entry["context"]))
    assert counter.calls == 1
    assert r1 == r2
    assert r1.yes_prob() == entry["probs"]["yes"]
    other = json.loads(path.read_text(encoding="utf-8"))["qa"][1]
    cached.get(PredictionRequest.qa(other["question"], other["context"]))
    assert counter.calls == 2


def test_make_provider_forms(tmp_path):
    spec = f"fixture:{fixture_path('qa_syn_provider.json')}"
    cached = make_provider(spec)
    assert isinstance(cached, CachingProvider)
    assert isinstance(cached.inner, FixtureProvider)
    bare = make_provider(spec, cache=False)
    assert isinstance(bare, FixtureProvider)
    remote = make_provider("http://localhost:9", cache=False)
    assert isinstance(remote, RemoteProvider)
    assert remote.base_url == "http://localhost:9"
    assert make_provider("http:localhost:9", cache=False).base_url == "http://localhost:9"
    assert make_provider("https://svc/", cache=False).base_url == "https://svc"
    with pytest.raises(ProviderError, match="provider spec"):
        make_provider("ftp://nope")
    with pytest.raises(ProviderError, match="fixture"):
        make_provider(f"fixture:{tmp_path / 'missing.json'}")


class _Script:
    """Mutable plan of canned responses for the stub server."""

    def __init__(self):
        self.requests = []
        self.plan = []

    def next_response(self, default):
        return self.plan.pop(0) if self.plan else default


class _Handler(BaseHTTPRequestHandler):
    script: _Script = None

    def log_message(self, *args):
        pass

    def _reply(self, status, body):
        raw = body if isinstance(body, bytes) else json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_GET(self):
        self.script.requests.append((self.path, None))
        status, body = self.script.next_response((200, {"status": "ok"}))
        self._reply(status, body)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length)) if length else {}
        self.script.requests.append((self.path, payload))
        status, body = self.script.next_response((200, NLI_OK))
        self._reply(status, body)


@pytest.fixture(scope="module")
def server():
    script = _Script()
    handler = type("Handler", (_Handler,), {"script": script})
    httpd = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_address[1]}", script
    httpd.shutdown()
    thread.join()


@pytest.fixture
def stub(server):
    url, script = server
    script.requests.clear()
    script.plan.clear()
    return url, script


def test_remote_provider_success(stub):
    url, script = stub
    provider = RemoteProvider(url)
    response = provider.get(PredictionRequest.nli("p", "h"))
    assert response.label3() is Label3.ENTAILMENT
    assert response.model == "stub"
    assert script.requests == [("/v1/nli", {"premise": "p", "hypothesis": "h"})]


def test_remote_provider_retries_on_503(stub):
    url, script = stub
    script.plan = [(503, {}), (503, {}), (200, NLI_OK)]
    provider = RemoteProvider(url, retries=3, backoff=0.001)
    response = provider.get(PredictionRequest.nli("p", "h"))
    assert response.label3() is Label3.ENTAILMENT
    assert len(script.requests) == 3


def test_remote_provider_gives_up_after_retries(stub):
    url, script = stub
    script.plan = [(503, {})] * 3
    provider = RemoteProvider(url, retries=2, backoff=0.001)
    with pytest.raises(ProviderError, match="failed after 3 attempts"):
        provider.get(PredictionRequest.nli("p", "h"))
    assert len(script.requests) == 3


def test_remote_provider_fails_fast_on_other_status(stub):
    url, script = stub
    script.plan = [(400, b"bad request")]
    provider = RemoteProvider(url, retries=3, backoff=0.001)
    with pytest.raises(ProviderError, match="HTTP 400"):
        provider.get(PredictionRequest.qa("q", "c"))
    assert len(script.requests) == 1


def test_remote_provider_rejects_invalid_bodies(stub):
    url, script = stub
    script.plan = [
        (200, {"model": "x", "probs": {"entailment": 0.9, "contradiction": 0.9, "neutral": 0.1}})
    ]
    provider = RemoteProvider(url, backoff=0.001)
    with pytest.raises(InvariantViolationError, match="sum to"):
        provider.get(PredictionRequest.nli("p", "h"))
    assert len(script.requests) == 1

    script.plan = [(200, b"not json")]
    with pytest.raises(ProviderError, match="non-JSON"):
        provider.get(PredictionRequest.nli("p", "h"))


def test_remote_provider_enforces_k(stub):
    url, script = stub
    script.plan = [(200, fm([("a", 0.5), ("b", 0.3), ("c", 0.2)]))]
    provider = RemoteProvider(url, backoff=0.001)
    with pytest.raises(InvariantViolationError, match="for k=2"):
        provider.get(PredictionRequest.fill_mask("x [MASK]", 2))


def test_remote_provider_health(stub):
    url, script = stub
    assert RemoteProvider(url).health()
    script.plan = [(503, {})]
    assert not RemoteProvider(url).health()
    assert not RemoteProvider("http://127.0.0.1:1", timeout=0.2).health()


def test_remote_provider_transport_errors_retry():
    provider = RemoteProvider("http://127.0.0.1:1", retries=1, backoff=0.001, timeout=0.2)
    with pytest.raises(ProviderError, match="failed after 2 attempts"):
        provider.get(PredictionRequest.nli("p", "h"))
