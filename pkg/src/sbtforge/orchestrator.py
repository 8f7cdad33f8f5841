"""Conversation orchestration: route each user message to the right
workflow, keep per-session history, and manage clarification round trips.

Three workflows exist. ``sbtGeneration`` turns commands into behavior
trees (persisted to a store offline, executed on a live agent online),
``sparqlQuery`` answers questions about the knowledge base, and
``semanticSearch`` answers questions from indexed documentation. A small
classifier prompt picks one; anything it cannot place falls back to
``sparqlQuery``.

When entity or action linking stalls mid-generation the orchestrator
parks the attempt as a pending disambiguation on the session and returns
a clarify response. ``resume_with_choice`` replays the original
instruction with the choice pre-answered (and learned into the synonym
dictionary), so the rerun sails through the point that stalled.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from sbtforge.agents.runtime import AgentInstance
from sbtforge.agents.template import GoalDefinition
from sbtforge.linking import LinkCandidate, SynonymDictionary, UnresolvedTermError
from sbtforge.llm import ChatRequest, Provider, ProviderError
from sbtforge.queries import (
    QueryWorkflowError,
    answer_question,
    fill_prompt,
    prompt_template,
)
from sbtforge.rdf.terms import Graph, Term
from sbtforge.search import VectorIndex, answer as answer_from_docs, citation, retrieve
from sbtforge.synthesis import (
    BehaviorStore,
    SynthesisError,
    SynthesisOutcome,
    persist_online,
    synthesize_behavior,
)

log = logging.getLogger("sbtforge.orchestrator")

WORKFLOWS = ("sbtGeneration", "sparqlQuery", "semanticSearch")
FALLBACK_WORKFLOW = "sparqlQuery"
MODES = ("offline", "online")

HISTORY_CAPACITY = 50
PROMPT_TURNS = 10  # how many recent turns the classifier prompt sees


class OrchestratorError(RuntimeError):
    """Protocol misuse: bad session mode, resume without a pending
    disambiguation, out-of-range choice."""


# ------------------------------------------------------------------- sessions


@dataclass(frozen=True)
class Turn:
    """One exchange. ``text`` is what the user sent; ``response`` what
    came back. ``workflow`` and ``outcome`` record how it was handled."""

    speaker: str
    text: str
    workflow: str = ""
    outcome: str = ""
    response: str = ""


class ConversationHistory:
    """Bounded turn log; oldest turns fall off past the capacity."""

    def __init__(self, session_id: str, capacity: int = HISTORY_CAPACITY):
        self.session_id = session_id
        self.capacity = capacity
        self.turns: deque[Turn] = deque(maxlen=capacity)

    def append(self, turn: Turn) -> None:
        self.turns.append(turn)

    def __len__(self) -> int:
        return len(self.turns)

    def recent(self, n: int = PROMPT_TURNS) -> list[Turn]:
        return list(self.turns)[-n:]

    def render_recent(self, n: int = PROMPT_TURNS) -> str:
        lines = []
        for turn in self.recent(n):
            lines.append(f"{turn.speaker}: {turn.text}")
            if turn.response:
                lines.append(f"assistant: {turn.response}")
        return "\n".join(lines) if lines else "(none)"


@dataclass(frozen=True)
class PendingDisambiguation:
    instruction: str
    surface: str
    candidates: tuple[LinkCandidate, ...]


@dataclass
class ChatSession:
    session_id: str
    mode: str = "offline"
    history: ConversationHistory = None
    pending: Optional[PendingDisambiguation] = None
    busy: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise OrchestratorError(f"unknown interaction mode {self.mode!r}")
        if self.history is None:
            self.history = ConversationHistory(self.session_id)


# ------------------------------------------------------------------ responses


@dataclass
class Response:
    """What a handle call hands back; ``kind`` doubles as the chat frame
    type (answer | clarify | error)."""

    kind: str
    text: str
    artifacts: dict = field(default_factory=dict)

    def as_frame(self) -> dict:
        frame = {"type": self.kind, "text": self.text}
        frame.update(self.artifacts)
        return frame


def user_frame(text: str) -> dict:
    return {"type": "user", "text": text}


def trace_frame(entries: Sequence[dict]) -> dict:
    return {"type": "trace", "entries": list(entries)}


def _candidate_payload(candidates: Sequence[LinkCandidate]) -> list[dict]:
    return [
        {"uri": c.uri.value, "label": c.label, "confidence": round(c.confidence, 4)}
        for c in candidates
    ]


# -------------------------------------------------------------- classification


def classify(text: str, history: ConversationHistory, provider: Provider) -> str:
    """Pick a workflow for ``text``; unknown classifier output falls back
    to sparqlQuery with a logged warning. Provider failures propagate."""
    prompt = fill_prompt(
        prompt_template("workflow-classification"),
        context=history.render_recent(),
        question=text,
    )
    request = ChatRequest(
        system_prompt="You route user messages to workflows.",
        messages=(("user", prompt),),
        expectation="jsonObject",
    )
    obj = json.loads(provider.complete(request))
    workflow = obj.get("workflow") if isinstance(obj, dict) else None
    if workflow not in WORKFLOWS:
        log.warning("classifier produced unknown workflow %r; falling back to %s",
                    workflow, FALLBACK_WORKFLOW)
        return FALLBACK_WORKFLOW
    return workflow


class _ClarifyCapture:
    """ask_user stand-in for synthesize_behavior. Pre-answered surfaces
    (from a resume) get their recorded choice; the first surface without
    one is captured for a clarify round trip and left unresolved."""

    def __init__(self, preset: Optional[Mapping[str, int]] = None):
        self.preset = dict(preset or {})
        self.surface: Optional[str] = None
        self.candidates: tuple[LinkCandidate, ...] = ()

    def __call__(self, surface: str, candidates: Sequence[LinkCandidate]) -> Optional[int]:
        if surface in self.preset:
            return self.preset[surface]
        if self.surface is None:
            self.surface = surface
            self.candidates = tuple(candidates)
        return None


# ---------------------------------------------------------------- orchestrator


class Orchestrator:
    """One per deployment; sessions hang off it by id.

    ``kb_source`` supplies the knowledge base for offline sessions (a
    Graph or a zero-argument callable returning one). Online sessions
    read the live agent's KB instead, and generated behaviors execute on
    that agent — offline sessions only ever touch the behavior store, so
    no request can reach an agent endpoint in offline mode.
    """

    def __init__(
        self,
        provider: Provider,
        kb_source,
        goals: Sequence[GoalDefinition] = (),
        dictionary: Optional[SynonymDictionary] = None,
        behavior_store: Optional[BehaviorStore] = None,
        agent: Optional[AgentInstance] = None,
        trigger_uri: Optional[Term] = None,
        search_index: Optional[VectorIndex] = None,
        templates=None,
    ):
        self.provider = provider
        self.kb_source = kb_source
        self.goals = list(goals)
        self.dictionary = dictionary
        self.behavior_store = behavior_store
        self.agent = agent
        self.trigger_uri = trigger_uri
        self.search_index = search_index
        self.templates = templates
        self.sessions: dict[str, ChatSession] = {}

    # -- session plumbing

    def session(self, session_id: str, mode: str = "offline") -> ChatSession:
        existing = self.sessions.get(session_id)
        if existing is not None:
            if existing.mode != mode:
                raise OrchestratorError(
                    f"session {session_id!r} is {existing.mode}, not {mode}"
                )
            return existing
        session = ChatSession(session_id=session_id, mode=mode)
        self.sessions[session_id] = session
        return session

    def _kb(self, session: ChatSession) -> Graph:
        if session.mode == "online" and self.agent is not None:
            return self.agent.store.snapshot()
        return self.kb_source() if callable(self.kb_source) else self.kb_source

    def _record(self, session: ChatSession, text: str, workflow: str, response: Response) -> None:
        session.history.append(
            Turn(
                speaker="user",
                text=text,
                workflow=workflow,
                outcome=response.kind,
                response=response.text,
            )
        )

    # -- the main entry point

    def handle(self, session: ChatSession, text: str) -> Response:
        if session.busy:
            raise OrchestratorError(f"session {session.session_id!r} already has a handle in flight")
        session.busy = True
        try:
            return self._handle(session, text)
        finally:
            session.busy = False

    def _handle(self, session: ChatSession, text: str) -> Response:
        text = text.strip()
        if not text:
            response = Response("error", "Empty message; nothing to do.")
            self._record(session, text, "", response)
            return response
        # a fresh message supersedes any clarification still pending
        session.pending = None
        try:
            workflow = classify(text, session.history, self.provider)
        except ProviderError as exc:
            response = Response("error", f"Could not classify the message: {exc}")
            self._record(session, text, "", response)
            return response
        if workflow == "sbtGeneration":
            response = self._generate(session, text)
        elif workflow == "semanticSearch":
            response = self._search(text)
        else:
            response = self._query(session, text)
        self._record(session, text, workflow, response)
        return response

    # -- workflow: questions over the KB

    def _query(self, session: ChatSession, text: str) -> Response:
        try:
            outcome = answer_question(text, self._kb(session), self.provider)
        except QueryWorkflowError as exc:
            return Response(
                "error",
                f"Query workflow gave up: {exc}",
                {"query": exc.query, "attempts": exc.attempts},
            )
        except ProviderError as exc:
            return Response("error", f"Language model failure: {exc}")
        return Response(
            "answer",
            outcome.answer,
            {"query": outcome.query, "corrections": outcome.correction_calls},
        )

    # -- workflow: questions over the docs

    def _search(self, text: str) -> Response:
        if self.search_index is None:
            return Response("error", "No documentation has been indexed; ingest some first.")
        try:
            retrieved = retrieve(text, self.search_index, self.provider)
            answer_text = answer_from_docs(text, retrieved, self.provider)
        except ProviderError as exc:
            return Response("error", f"Language model failure: {exc}")
        sources = []
        for chunk, _score in retrieved:
            cite = citation(chunk)
            if cite not in sources:
                sources.append(cite)
        return Response("answer", answer_text, {"sources": sources})

    # -- workflow: instruction -> behavior tree

    def _generate(
        self, session: ChatSession, text: str, preset: Optional[Mapping[str, int]] = None
    ) -> Response:
        if session.mode == "offline" and self.behavior_store is None:
            return Response(
                "error",
                "Offline mode needs a behavior store; configure one before generating behaviors.",
            )
        if session.mode == "online" and (self.agent is None or self.trigger_uri is None):
            return Response(
                "error", "Online mode needs a live agent and a trigger event to execute behaviors."
            )
        capture = _ClarifyCapture(preset)
        try:
            outcome = synthesize_behavior(
                text,
                self._kb(session),
                self.goals,
                self.provider,
                self.dictionary,
                ask_user=capture,
                templates=self.templates,
            )
        except UnresolvedTermError as exc:
            if capture.surface is not None:
                session.pending = PendingDisambiguation(
                    instruction=text,
                    surface=capture.surface,
                    candidates=capture.candidates,
                )
                options = "; ".join(
                    f"[{i}] {c.label}" for i, c in enumerate(capture.candidates)
                )
                return Response(
                    "clarify",
                    f"Which {capture.surface!r} did you mean? {options}",
                    {
                        "surface": capture.surface,
                        "candidates": _candidate_payload(capture.candidates),
                    },
                )
            return Response("error", f"Could not link the instruction: {exc}")
        except (SynthesisError, QueryWorkflowError) as exc:
            return Response("error", f"Behavior generation failed: {exc}")
        except ProviderError as exc:
            return Response("error", f"Language model failure: {exc}")
        if session.mode == "online":
            return self._execute(outcome)
        return self._persist(outcome)

    def _persist(self, outcome: SynthesisOutcome) -> Response:
        try:
            path = self.behavior_store.save(outcome.tree)
        except SynthesisError as exc:
            return Response("error", str(exc))
        return Response(
            "answer",
            f"Generated behavior '{outcome.name}' "
            f"({len(outcome.tree.nodes())} nodes); saved to {path.name}.",
            {
                "behavior": path.stem,
                "tree_uri": outcome.tree.root_node.uri.value,
                "path": str(path),
            },
        )

    def _execute(self, outcome: SynthesisOutcome) -> Response:
        uri, results = persist_online(outcome.tree, self.agent, self.trigger_uri)
        status = results[0].status.value if results else "idle"
        trace = [entry.as_dict() for result in results for entry in result.trace]
        return Response(
            "answer",
            f"Executed behavior '{outcome.name}': {status}.",
            {"tree_uri": uri.value, "status": status, "trace": trace},
        )

    # -- clarification resume

    def resume_with_choice(self, session: ChatSession, choice_index: int) -> Response:
        if session.busy:
            raise OrchestratorError(f"session {session.session_id!r} already has a handle in flight")
        pending = session.pending
        if pending is None:
            raise OrchestratorError("no disambiguation is pending for this session")
        if not 0 <= choice_index < len(pending.candidates):
            raise OrchestratorError(
                f"choice {choice_index} is out of range (0..{len(pending.candidates) - 1})"
            )
        session.busy = True
        try:
            session.pending = None
            # replay the original instruction with the choice pre-answered;
            # synthesize_behavior learns it into the dictionary on the way
            response = self._generate(
                session, pending.instruction, preset={pending.surface: choice_index}
            )
            chosen = pending.candidates[choice_index]
            self._record(
                session,
                f"(picked {chosen.label} for {pending.surface!r})",
                "sbtGeneration",
                response,
            )
            return response
        finally:
            session.busy = False
