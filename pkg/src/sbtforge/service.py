"""The HTTP service: agent REST routes, per-agent SPARQL endpoints, a
behavior file store, and the chat channel backed by the orchestrator.

A missing language provider only disables the chat workflows — agents,
their endpoints, and SPARQL all keep working. The demo toggle spawns the
Blocks World environment server and a pre-instantiated agent wired to
it; stopping the service stops that environment too.
"""

from __future__ import annotations

import logging
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import uvicorn
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from sbtforge.agents import AgentRegistry, EnvServer, load_template, scene_canonical
from sbtforge.agents.runtime import AgentError
from sbtforge.assets import data_text
from sbtforge.linking import SynonymDictionary
from sbtforge.llm import Provider, ProviderError, create_provider, load_config
from sbtforge.orchestrator import MODES, Orchestrator, OrchestratorError
from sbtforge.rdf.evaluate import evaluate
from sbtforge.rdf.results import result_to_json
from sbtforge.rdf.sparql import SparqlParseError, UnsupportedSparqlError, parse_query
from sbtforge.rdf.terms import Graph, iri
from sbtforge.rdf.turtle import TurtleParseError, parse_turtle, serialize_turtle
from sbtforge.bt.load import serialize_tree
from sbtforge.search import SearchError, load_index
from sbtforge.synthesis import BehaviorStore, SynthesisError

log = logging.getLogger("sbtforge.service")

AG = "http://sbtforge.org/agents/blocksworld#"
DEMO_AGENT = "blocksworld"


class ServiceError(RuntimeError):
    pass


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    data_dir: Path = Path("sbtforge-data")
    default_mode: str = "offline"
    demo: bool = True
    provider_config: Optional[str] = None  # TOML path; env vars still apply

    def validate(self) -> None:
        problems = []
        if not 0 <= self.port <= 65535:
            problems.append(f"port: {self.port} is outside 0..65535")
        if self.default_mode not in MODES:
            problems.append(f"default_mode: {self.default_mode!r} is not one of {MODES}")
        try:
            Path(self.data_dir).mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            problems.append(f"data_dir: {exc}")
        if problems:
            raise ServiceError("invalid service configuration: " + "; ".join(problems))


def build_provider(config: ServiceConfig) -> Optional[Provider]:
    """None when nothing is configured — the service still runs, chat
    workflows answer with a diagnostic instead."""
    try:
        provider_config = load_config(config.provider_config)
    except (OSError, ValueError) as exc:
        log.warning("provider config unreadable (%s); language workflows disabled", exc)
        return None
    unconfigured = (
        config.provider_config is None
        and provider_config.kind == "scripted"
        and provider_config.script_path is None
    )
    if unconfigured:
        return None
    try:
        return create_provider(provider_config)
    except ProviderError as exc:
        log.warning("provider unavailable (%s); language workflows disabled", exc)
        return None


# ------------------------------------------------------------------- the app


def create_app(
    config: ServiceConfig,
    provider: Optional[Provider] = None,
    registry: Optional[AgentRegistry] = None,
) -> FastAPI:
    config.validate()
    if provider is None:
        provider = build_provider(config)
    registry = registry if registry is not None else AgentRegistry()
    store = BehaviorStore(Path(config.data_dir) / "behaviors")

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        env = None
        agent = None
        if config.demo:
            env = EnvServer(scene_canonical()).start()
            graph = parse_turtle(data_text("blocksworld-agent.ttl"))
            template = load_template(graph, initial_knowledge=scene_canonical())
            agent = registry.instantiate(template, DEMO_AGENT, externals={"env": env.url})
        orchestrator = None
        if provider is not None:
            dictionary = SynonymDictionary("service", directory=config.data_dir)
            if agent is not None:
                # bootstrap so the stock instruction works out of the box
                dictionary.learn("put", iri(AG + "StackGoal"), source="seed")
            index_path = Path(config.data_dir) / "index.bin"
            search_index = None
            if index_path.exists():
                try:
                    search_index = load_index(index_path)
                except SearchError as exc:
                    log.warning("ignoring unreadable search index: %s", exc)
            orchestrator = Orchestrator(
                provider,
                scene_canonical() if config.demo else Graph(),
                goals=agent.template.goals if agent is not None else (),
                dictionary=dictionary,
                behavior_store=store,
                agent=agent,
                trigger_uri=iri(AG + "userCommandEvent") if agent is not None else None,
                search_index=search_index,
            )
        app.state.env = env
        app.state.demo_agent = agent
        app.state.orchestrator = orchestrator
        try:
            yield
        finally:
            if env is not None:
                env.stop()
            app.state.env = None

    app = FastAPI(title="sbtforge", lifespan=lifespan)
    app.state.config = config
    app.state.registry = registry
    app.state.provider = provider
    app.state.store = store
    app.state.orchestrator = None
    app.state.env = None

    # -- health and agent overview

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "agents": registry.names(),
            "chat": app.state.orchestrator is not None,
        }

    @app.get("/agents")
    def list_agents():
        return [registry.get(name).overview() for name in registry.names()]

    @app.get("/agents/{name}")
    def agent_detail(name: str):
        agent = registry.get(name)
        if agent is None:
            return PlainTextResponse(f"no agent named {name!r}", status_code=404)
        doc = agent.overview()
        doc["trace"] = [entry.as_dict() for entry in agent.last_trace]
        return doc

    # -- SPARQL 1.1 protocol over the agent KB
    # (declared before the endpoint route so "sparql" never matches it)

    def _sparql(name: str, query_text: Optional[str]):
        agent = registry.get(name)
        if agent is None:
            return PlainTextResponse(f"no agent named {name!r}", status_code=404)
        if not query_text:
            return PlainTextResponse("missing query parameter", status_code=400)
        try:
            form = parse_query(query_text)
            result = evaluate(agent.store.snapshot(), form)
        except (SparqlParseError, UnsupportedSparqlError, ValueError) as exc:
            # the raw message goes back verbatim; the autocorrect loop feeds
            # whatever the server said straight to the model
            return PlainTextResponse(str(exc), status_code=400)
        if result.kind == "construct":
            return Response(serialize_turtle(result.graph), media_type="text/turtle")
        return JSONResponse(
            result_to_json(result), media_type="application/sparql-results+json"
        )

    @app.get("/agents/{name}/sparql")
    def sparql_get(name: str, query: Optional[str] = None):
        return _sparql(name, query)

    @app.post("/agents/{name}/sparql")
    async def sparql_post(name: str, request: Request):
        form = await request.form()
        return _sparql(name, form.get("query"))

    # -- Linked Data message endpoints

    @app.post("/agents/{name}/{endpoint}")
    async def agent_endpoint(name: str, endpoint: str, request: Request):
        agent = registry.get(name)
        if agent is None:
            return PlainTextResponse(f"no agent named {name!r}", status_code=404)
        body = (await request.body()).decode("utf-8")
        try:
            payload = parse_turtle(body) if body.strip() else Graph()
        except TurtleParseError as exc:
            return PlainTextResponse(f"bad Turtle payload: {exc}", status_code=400)
        try:
            event_uri = agent.receive_message(endpoint, payload)
        except AgentError as exc:
            return PlainTextResponse(str(exc), status_code=404)
        results = agent.run_pending()
        return {
            "event": event_uri.value,
            "ticks": [r.status.value for r in results],
        }

    # -- behavior documents (what the tree view fetches)

    @app.get("/behaviors")
    def list_behaviors():
        return {"behaviors": store.names()}

    @app.get("/behaviors/{name}")
    def behavior_document(name: str):
        try:
            tree = store.load(name)
        except SynthesisError as exc:
            return PlainTextResponse(str(exc), status_code=404)
        return Response(serialize_turtle(serialize_tree(tree)), media_type="text/turtle")

    # -- chat

    def _chat_frames(payload: dict) -> list[dict]:
        orchestrator: Optional[Orchestrator] = app.state.orchestrator
        if orchestrator is None:
            return [{"type": "error", "text": "No language provider is configured; chat is disabled."}]
        session_id = str(payload.get("session", "default"))
        mode = str(payload.get("mode", config.default_mode))
        try:
            session = orchestrator.session(session_id, mode)
            if "choice" in payload:
                response = orchestrator.resume_with_choice(session, int(payload["choice"]))
            else:
                response = orchestrator.handle(session, str(payload.get("text", "")))
        except (OrchestratorError, ValueError) as exc:
            return [{"type": "error", "text": str(exc)}]
        frame = response.as_frame()
        trace = frame.pop("trace", None)
        frames = [frame]
        if trace:
            frames.append({"type": "trace", "entries": trace})
        return frames

    @app.post("/chat")
    def chat_http(payload: dict):
        return {"frames": _chat_frames(payload)}

    @app.websocket("/chat")
    async def chat_ws(ws: WebSocket):
        await ws.accept()
        try:
            while True:
                payload = await ws.receive_json()
                for frame in _chat_frames(payload):
                    await ws.send_json(frame)
        except WebSocketDisconnect:
            return

    return app


# ------------------------------------------------------------------ processes


class ServiceHandle:
    """A service running on a background thread; tests and the console
    talk to ``url``, ``stop()`` is idempotent."""

    def __init__(self, config: ServiceConfig, server: uvicorn.Server, thread: threading.Thread):
        self.config = config
        self._server = server
        self._thread = thread
        self._stopped = False

    @property
    def port(self) -> int:
        for srv in self._server.servers:
            for sock in srv.sockets:
                return sock.getsockname()[1]
        return self.config.port

    @property
    def url(self) -> str:
        return f"http://{self.config.host}:{self.port}"

    def stop(self) -> None:
        if self._stopped:
            return
        self._stopped = True
        self._server.should_exit = True
        self._thread.join(timeout=10)

    def __enter__(self) -> "ServiceHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def start_service(
    config: ServiceConfig,
    provider: Optional[Provider] = None,
    registry: Optional[AgentRegistry] = None,
) -> ServiceHandle:
    app = create_app(config, provider=provider, registry=registry)
    uv_config = uvicorn.Config(app, host=config.host, port=config.port, log_level="warning")
    server = uvicorn.Server(uv_config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if not thread.is_alive():
            raise ServiceError(f"could not bind {config.host}:{config.port}")
        if time.monotonic() > deadline:
            server.should_exit = True
            raise ServiceError("service did not start within 10s")
        time.sleep(0.02)
    return ServiceHandle(config, server, thread)


def serve(config: ServiceConfig, provider: Optional[Provider] = None) -> None:
    """Blocking entry point for the CLI."""
    app = create_app(config, provider=provider)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
