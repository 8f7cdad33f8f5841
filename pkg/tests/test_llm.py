"""Provider abstraction: scripted determinism, the JSON-object retry
contract, hash embeddings, config loading, and the HTTP client."""

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from sbtforge.llm import (
    EMBED_DIM,
    ChatRequest,
    EmbeddingVector,
    HttpProvider,
    ProviderConfig,
    ProviderError,
    REPROMPT_INSTRUCTION,
    ScriptRule,
    ScriptedProvider,
    cosine,
    create_provider,
    load_config,
    load_script,
)


def req(text: str, expectation: str = "freeText", tier: str = "generation") -> ChatRequest:
    return ChatRequest(system_prompt="sys", messages=(("user", text),), expectation=expectation, tier=tier)


# -------------------------------------------------------------------- scripted


def test_scripted_first_match_wins_and_is_deterministic():
    provider = ScriptedProvider(
        rules=[
            ScriptRule(match="classify", response='{"workflow":"sbt_generation"}'),
            ScriptRule(match="class", response="never reached"),
        ]
    )
    request = req("please classify this input", expectation="jsonObject")
    first = provider.complete(request)
    assert first == '{"workflow":"sbt_generation"}'
    assert provider.complete(request) == first
    assert provider.complete_json(request) == {"workflow": "sbt_generation"}


def test_scripted_default_and_exhaustion():
    with_default = ScriptedProvider(rules=[], default="fallback text")
    assert with_default.complete(req("anything")) == "fallback text"
    bare = ScriptedProvider(rules=[])
    with pytest.raises(ProviderError, match="script exhausted"):
        bare.complete(req("anything"))


def test_json_expectation_tolerates_fences():
    provider = ScriptedProvider(rules=[ScriptRule(match="q", response='```json\n{"a": 1}\n```')])
    assert provider.complete(req("q", expectation="jsonObject")) == '{"a": 1}'


def test_json_expectation_reprompts_once_then_succeeds():
    # correction rules go first: the reprompted prompt still contains the
    # original text, so a later prose rule would match again
    provider = ScriptedProvider(
        rules=[
            ScriptRule(match=REPROMPT_INSTRUCTION, response='{"fixed": true}'),
            ScriptRule(match="classify", response="Sure! The workflow is probably sbt_generation."),
        ]
    )
    assert provider.complete(req("classify this", expectation="jsonObject")) == '{"fixed": true}'


def test_json_expectation_fails_after_single_reprompt():
    calls = []

    class Counting(ScriptedProvider):
        def _complete_once(self, request):
            calls.append(request)
            return super()._complete_once(request)

    provider = Counting(rules=[], default="still prose")
    with pytest.raises(ProviderError, match="not JSON"):
        provider.complete(req("x", expectation="jsonObject"))
    assert len(calls) == 2
    assert REPROMPT_INSTRUCTION in calls[1].prompt_text()


def test_json_array_is_rejected():
    provider = ScriptedProvider(rules=[], default="[1, 2]")
    with pytest.raises(ProviderError, match="not an object"):
        provider.complete(req("x", expectation="jsonObject"))


# ------------------------------------------------------------------ embeddings


def test_embedding_identity_and_determinism():
    provider = ScriptedProvider()
    (a,) = provider.embed(["stack the blue block"])
    (b,) = ScriptedProvider().embed(["stack the blue block"])
    assert a.dimension == EMBED_DIM
    assert a == b
    assert cosine(a, a) == pytest.approx(1.0, abs=1e-12)


def test_random_pairs_have_low_cosine():
    provider = ScriptedProvider()
    worst = 0.0
    for i in range(1000):
        u, v = provider.embed([f"text-a-{i}", f"text-b-{i}"])
        worst = max(worst, abs(cosine(u, v)))
    assert worst < 0.9


def test_embedding_overrides_give_controlled_cosine():
    v2 = [0.42, math.sqrt(1 - 0.42**2)] + [0.0] * (EMBED_DIM - 2)
    provider = ScriptedProvider(
        embedding_overrides={
            "lift": [1.0] + [0.0] * (EMBED_DIM - 1),
            "pick up": v2,
        }
    )
    a, b = provider.embed(["lift", "pick up"])
    assert cosine(a, b) == pytest.approx(0.42, abs=1e-9)


def test_embed_rejects_empty_and_mixed_dimensions():
    provider = ScriptedProvider()
    with pytest.raises(ProviderError, match="at least one"):
        provider.embed([])
    with pytest.raises(ProviderError, match="dimensions"):
        cosine(EmbeddingVector(values=(1.0,)), EmbeddingVector(values=(1.0, 0.0)))


# ----------------------------------------------------------------------- files


def test_load_script_serializes_object_responses(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(
        json.dumps(
            [
                {"match": "classify", "response": {"workflow": "semanticSearch"}},
                {"match": "other", "response": "plain"},
            ]
        )
    )
    rules = load_script(path)
    assert rules[0] == ScriptRule(match="classify", response='{"workflow": "semanticSearch"}')
    assert rules[1].response == "plain"


def test_config_toml_with_env_overrides(tmp_path):
    path = tmp_path / "provider.toml"
    path.write_text(
        '[provider]\nkind = "http"\nendpoint = "http://example.org/v1"\ntimeout = 5\n'
        '[provider.models]\ngeneration = "big"\ncorrection = "bigger"\n'
    )
    config = load_config(path, env={})
    assert (config.kind, config.endpoint, config.timeout) == ("http", "http://example.org/v1", 5.0)
    assert config.models["correction"] == "bigger"
    assert config.models["embedding"] == "default"

    overridden = load_config(path, env={"SBTFORGE_PROVIDER_TIMEOUT": "9.5", "SBTFORGE_MODEL_GENERATION": "small"})
    assert overridden.timeout == 9.5
    assert overridden.models["generation"] == "small"


def test_create_provider_kinds():
    assert isinstance(create_provider(ProviderConfig()), ScriptedProvider)
    with pytest.raises(ProviderError, match="endpoint"):
        create_provider(ProviderConfig(kind="http"))
    with pytest.raises(ProviderError, match="unknown provider kind"):
        create_provider(ProviderConfig(kind="telepathy"))


# ------------------------------------------------------------------------ http


class _GoldenApi(BaseHTTPRequestHandler):
    chat_responses: list = []
    requests_seen: list = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        type(self).requests_seen.append(
            {"path": self.path, "body": body, "auth": self.headers.get("Authorization")}
        )
        if self.path.endswith("/embeddings"):
            doc = {"data": [{"embedding": [float(len(t)), 1.0]} for t in body["input"]]}
        else:
            content = type(self).chat_responses.pop(0)
            doc = {"choices": [{"message": {"content": content}}]}
        payload = json.dumps(doc).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def api_server():
    _GoldenApi.chat_responses = []
    _GoldenApi.requests_seen = []
    server = ThreadingHTTPServer(("127.0.0.1", 0), _GoldenApi)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


def test_http_provider_round_trip(api_server, monkeypatch):
    monkeypatch.setenv("SBTFORGE_API_KEY", "sekrit")
    config = ProviderConfig(kind="http", endpoint=api_server, models={"generation": "gen-1", "correction": "fix-1"})
    provider = HttpProvider(config)
    _GoldenApi.chat_responses = ["hello back"]

    assert provider.complete(req("hello", tier="correction")) == "hello back"
    seen = _GoldenApi.requests_seen[0]
    assert seen["body"]["model"] == "fix-1"
    assert seen["body"]["messages"][0] == {"role": "system", "content": "sys"}
    assert seen["auth"] == "Bearer sekrit"


def test_http_provider_reprompts_then_errors(api_server):
    config = ProviderConfig(kind="http", endpoint=api_server)
    provider = HttpProvider(config)
    _GoldenApi.chat_responses = ["prose the first", "prose the second"]

    with pytest.raises(ProviderError, match="not JSON"):
        provider.complete(req("classify", expectation="jsonObject"))
    assert len(_GoldenApi.requests_seen) == 2
    retry_messages = _GoldenApi.requests_seen[1]["body"]["messages"]
    assert retry_messages[-1]["content"] == REPROMPT_INSTRUCTION


def test_http_embeddings_round_trip(api_server):
    provider = HttpProvider(ProviderConfig(kind="http", endpoint=api_server))
    vectors = provider.embed(["ab", "abcd"])
    assert [v.values for v in vectors] == [(2.0, 1.0), (4.0, 1.0)]


def test_http_transport_failure():
    provider = HttpProvider(ProviderConfig(kind="http", endpoint="http://127.0.0.1:9", timeout=0.5))
    with pytest.raises(ProviderError, match="transport failure"):
        provider.complete(req("x"))
