"""Language-model access: chat completion and text embedding behind one
small interface, with a deterministic scripted implementation for
offline runs and an HTTP client for real deployments.

Everything downstream (classification, extraction, query generation,
retrieval) talks to a Provider; swapping the scripted provider for the
HTTP one is a configuration change, not a code change.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import requests

EMBED_DIM = 64

REPROMPT_INSTRUCTION = (
    "That was not a single JSON object. Respond with exactly one JSON object and nothing else."
)

_FENCE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)


class ProviderError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    messages: tuple = ()  # (role, content) pairs
    expectation: str = "freeText"  # freeText | jsonObject
    tier: str = "generation"  # generation | correction

    def prompt_text(self) -> str:
        parts = [self.system_prompt] + [content for _role, content in self.messages]
        return "\n".join(parts)

    def with_reprompt(self, previous_response: str) -> "ChatRequest":
        extra = (("assistant", previous_response), ("user", REPROMPT_INSTRUCTION))
        return ChatRequest(
            system_prompt=self.system_prompt,
            messages=tuple(self.messages) + extra,
            expectation=self.expectation,
            tier=self.tier,
        )


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple

    @property
    def dimension(self) -> int:
        return len(self.values)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dimension != b.dimension:
        raise ProviderError(f"cosine undefined across dimensions {a.dimension} and {b.dimension}")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    na = math.sqrt(sum(x * x for x in a.values))
    nb = math.sqrt(sum(y * y for y in b.values))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def _strip_fences(text: str) -> str:
    stripped = text.strip()
    m = _FENCE.match(stripped)
    return m.group(1).strip() if m else stripped


def parse_json_object(text: str) -> dict:
    """A response meets the jsonObject expectation iff it is one JSON object
    (markdown fences tolerated)."""
    cleaned = _strip_fences(text)
    try:
        value = json.loads(cleaned)
    except json.JSONDecodeError as exc:
        raise ProviderError(f"response is not JSON: {exc}") from exc
    if not isinstance(value, dict):
        raise ProviderError(f"response is JSON but not an object: {type(value).__name__}")
    return value


class Provider:
    """Chat completion plus embeddings. Subclasses supply one raw
    completion; the JSON expectation (with its single reprompt) is
    handled here so every implementation retries identically."""

    def complete(self, request: ChatRequest) -> str:
        response = self._complete_once(request)
        if request.expectation != "jsonObject":
            return response
        try:
            parse_json_object(response)
            return _strip_fences(response)
        except ProviderError:
            pass
        retry = self._complete_once(request.with_reprompt(response))
        parse_json_object(retry)  # raises if still malformed
        return _strip_fences(retry)

    def complete_json(self, request: ChatRequest) -> dict:
        return parse_json_object(self.complete(request))

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ProviderError("embed() requires at least one text")
        return [self._embed_one(t) for t in texts]

    def _complete_once(self, request: ChatRequest) -> str:
        raise NotImplementedError

    def _embed_one(self, text: str) -> EmbeddingVector:
        raise NotImplementedError


@dataclass(frozen=True)
class ScriptRule:
    match: str  # substring of the flattened prompt text
    response: str


def _script_doc(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    # the original format was a bare list of rules; keep reading it
    return doc if isinstance(doc, dict) else {"rules": doc}


def _canned(response) -> str:
    return response if isinstance(response, str) else json.dumps(response)


def load_script(path) -> list[ScriptRule]:
    """Script files are JSON: either a list of {match, response} or an
    object with rules/default/embeddings/synonyms. Object-valued
    responses are serialized so fixtures can write JSON answers plainly."""
    return [
        ScriptRule(match=entry["match"], response=_canned(entry["response"]))
        for entry in _script_doc(path).get("rules", [])
    ]


def scripted_from_file(path) -> "ScriptedProvider":
    doc = _script_doc(path)
    default = doc.get("default")
    return ScriptedProvider(
        rules=load_script(path),
        default=_canned(default) if default is not None else None,
        embedding_overrides=doc.get("embeddings"),
    )


def script_synonyms(path) -> dict[str, str]:
    """Surface → URI seeds riding along in a script file; the CLI and the
    service feed them to the synonym dictionary, not the provider."""
    return dict(_script_doc(path).get("synonyms", {}))


def _hash_unit_vector(text: str, dimension: int = EMBED_DIM) -> tuple:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    raw = [rng.gauss(0.0, 1.0) for _ in range(dimension)]
    norm = math.sqrt(sum(v * v for v in raw)) or 1.0
    return tuple(v / norm for v in raw)


def _normalized(values: Sequence[float]) -> tuple:
    norm = math.sqrt(sum(v * v for v in values)) or 1.0
    return tuple(v / norm for v in values)


class ScriptedProvider(Provider):
    """Pure function of (script, request): ordered rules, first match wins,
    then the default; embeddings are seeded hashes of the text with an
    override table for fixtures that need controlled similarities."""

    def __init__(
        self,
        rules: Sequence[ScriptRule] = (),
        default: Optional[str] = None,
        embedding_overrides: Optional[dict[str, Sequence[float]]] = None,
    ):
        self.rules = list(rules)
        self.default = default
        self.embedding_overrides = {
            text: _normalized(values) for text, values in (embedding_overrides or {}).items()
        }

    def _complete_once(self, request: ChatRequest) -> str:
        prompt = request.prompt_text()
        for rule in self.rules:
            if rule.match in prompt:
                return rule.response
        if self.default is not None:
            return self.default
        raise ProviderError("script exhausted: no rule matches and no default response")

    def _embed_one(self, text: str) -> EmbeddingVector:
        override = self.embedding_overrides.get(text)
        if override is not None:
            return EmbeddingVector(values=override)
        return EmbeddingVector(values=_hash_unit_vector(text))


class HttpProvider(Provider):
    """OpenAI-compatible chat/embeddings client. Model names come from the
    per-tier configuration slots; the API key is read from the
    environment variable the config names."""

    def __init__(self, config: "ProviderConfig"):
        self.config = config
        self.endpoint = config.endpoint.rstrip("/")
        if not self.endpoint:
            raise ProviderError("http provider requires an endpoint URL")

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, body: dict) -> dict:
        try:
            resp = requests.post(
                f"{self.endpoint}{path}",
                json=body,
                headers=self._headers(),
                timeout=self.config.timeout,
            )
        except requests.RequestException as exc:
            raise ProviderError(f"transport failure: {exc}") from exc
        if resp.status_code // 100 != 2:
            raise ProviderError(f"provider returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderError(f"provider returned non-JSON body: {exc}") from exc

    def _complete_once(self, request: ChatRequest) -> str:
        messages = [{"role": "system", "content": request.system_prompt}]
        messages += [{"role": role, "content": content} for role, content in request.messages]
        body = {"model": self.config.models.get(request.tier, "default"), "messages": messages}
        doc = self._post("/chat/completions", body)
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed completion response: {exc}") from exc

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ProviderError("embed() requires at least one text")
        body = {"model": self.config.models.get("embedding", "default"), "input": list(texts)}
        doc = self._post("/embeddings", body)
        try:
            rows = doc["data"]
            vectors = [EmbeddingVector(values=tuple(row["embedding"])) for row in rows]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderError(f"expected {len(texts)} embeddings, got {len(vectors)}")
        return vectors


# ------------------------------------------------------------- configuration


@dataclass
class ProviderConfig:
    kind: str = "scripted"  # scripted | http
    endpoint: str = ""
    api_key_env: str = "SBTFORGE_API_KEY"
    timeout: float = 30.0
    models: dict = field(
        default_factory=lambda: {
            "generation": "default",
            "correction": "default",
            "embedding": "default",
        }
    )
    script_path: Optional[str] = None


_ENV_FIELDS = {
    "SBTFORGE_PROVIDER_KIND": "kind",
    "SBTFORGE_PROVIDER_ENDPOINT": "endpoint",
    "SBTFORGE_PROVIDER_API_KEY_ENV": "api_key_env",
    "SBTFORGE_SCRIPT_PATH": "script_path",
}


def load_config(path=None, env: Optional[dict] = None) -> ProviderConfig:
    """TOML file first, then environment overrides on top."""
    import tomli

    env = os.environ if env is None else env
    config = ProviderConfig()
    if path is not None:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
        section = doc.get("provider", {})
        for name in ("kind", "endpoint", "api_key_env"):
            if name in section:
                setattr(config, name, section[name])
        if "timeout" in section:
            config.timeout = float(section["timeout"])
        config.models.update(section.get("models", {}))
        if "script" in section and "path" in section["script"]:
            config.script_path = section["script"]["path"]
    for var, name in _ENV_FIELDS.items():
        if env.get(var):
            setattr(config, name, env[var])
    if env.get("SBTFORGE_PROVIDER_TIMEOUT"):
        config.timeout = float(env["SBTFORGE_PROVIDER_TIMEOUT"])
    for tier in ("generation", "correction", "embedding"):
        var = f"SBTFORGE_MODEL_{tier.upper()}"
        if env.get(var):
            config.models[tier] = env[var]
    return config


def create_provider(config: ProviderConfig) -> Provider:
    if config.kind == "scripted":
        if config.script_path:
            return scripted_from_file(config.script_path)
        return ScriptedProvider([])
    if config.kind == "http":
        return HttpProvider(config)
    raise ProviderError(f"unknown provider kind {config.kind!r}")
