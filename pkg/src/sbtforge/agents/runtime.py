"""Agent instances: knowledge bases, event queues, goal dispatch, and
REST-bound action execution.

Belief refresh is subject-level: an action response describes the
current state of every resource it mentions, so for each subject in the
response we drop what the KB believed about that subject and take the
response's description wholesale. Pair-level replacement is not enough —
after a pickup the world graph simply has no (block, onTable) statement,
and an omitted pair cannot retract a stale one. This is also why the
world model keeps sentinel triples (gripper holding bw:nothing): a
subject absent from the response keeps its old description, so the
gripper must always appear.
"""

from __future__ import annotations

import re
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import requests

from sbtforge.agents.template import (
    ActionDefinition,
    AgentTemplate,
    BehaviorBinding,
    GoalDefinition,
)
from sbtforge.bt.model import BehaviorTree, TickStatus
from sbtforge.bt.tick import TickResult, tick
from sbtforge.rdf.evaluate import QueryResult, evaluate
from sbtforge.rdf.sparql import QueryForm, bind_query, format_pattern_term
from sbtforge.rdf.store import TripleStore
from sbtforge.rdf.terms import Graph, Term, Triple, iri
from sbtforge.rdf.turtle import TurtleParseError, parse_turtle

_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


class AgentError(RuntimeError):
    pass


def refresh_beliefs(kb: Graph, incoming: Graph) -> None:
    """Replace KB statements subject-wise: every subject the incoming graph
    describes is dropped from the KB and re-added with the incoming
    description. Subjects the response does not mention are untouched."""
    subjects = {t.subject for t in incoming.triples}
    for s in subjects:
        for old in kb.match(s, None, None):
            kb.discard(old)
    kb.merge(incoming)


def fill_template(template: str, bindings: dict[str, str]) -> str:
    def sub(match: re.Match) -> str:
        name = match.group(1)
        if name not in bindings:
            raise AgentError(f"unresolved placeholder {{{name}}} in template")
        return bindings[name]

    return _PLACEHOLDER.sub(sub, template)


class _AgentTickContext:
    """Adapts an AgentInstance to the behavior-tree tick surface."""

    def __init__(self, agent: "AgentInstance"):
        self.agent = agent

    def evaluate(self, form: QueryForm) -> QueryResult:
        return self.agent.store.query(form)

    def apply(self, form: QueryForm) -> QueryResult:
        return self.agent.store.update(form)

    def dispatch_goal(self, goal_uri: Term, params: Graph) -> TickStatus:
        return self.agent.dispatch_goal(goal_uri, params)

    def run_action(self, action_uri: Term, node_uri: Term) -> TickStatus:
        return self.agent.run_action(action_uri, node_uri)


@dataclass
class AsyncCompletion:
    status: TickStatus
    response: Optional[Graph] = None


class AgentInstance:
    def __init__(self, template: AgentTemplate, name: str, externals: Optional[dict] = None):
        self.template = template
        self.name = name
        self.uri = iri(f"http://sbtforge.org/agents/{name}")
        self.externals = dict(externals or {})
        self.store = TripleStore(template.initial_knowledge.copy())
        self.event_queue: deque = deque()
        self._tick_lock = threading.RLock()
        self._goal_frames: list[dict[str, Term]] = []
        self._async_state: dict[str, object] = {}  # node uri -> "inflight" | AsyncCompletion
        self._installed_trees: dict[Term, BehaviorTree] = {}
        self._installed_bindings: list[BehaviorBinding] = []
        self.last_trace: list = []
        self.last_status: Optional[TickStatus] = None
        self.running_behaviors: set = set()
        self.log: list[str] = []

    # ------------------------------------------------------------ messaging

    def endpoint(self, name: str):
        for ep in self.template.endpoints:
            if ep.name == name:
                return ep
        return None

    def receive_message(self, endpoint_name: str, payload: Graph) -> Term:
        ep = self.endpoint(endpoint_name)
        if ep is None:
            raise AgentError(f"unknown endpoint {endpoint_name!r} on agent {self.name}")
        if len(payload):
            self.store.mutate(lambda g: g.merge(payload))
        self.event_queue.append((ep.event_uri, payload))
        return ep.event_uri

    def fire_event(self, event_uri: Term) -> None:
        """Enqueue a declared event directly (for events without endpoints)."""
        if event_uri not in self.template.events:
            raise AgentError(f"undeclared event {event_uri.value} on agent {self.name}")
        self.event_queue.append((event_uri, Graph()))

    def run_pending(self) -> list[TickResult]:
        """Handle queued events in arrival order; one tick per bound behavior."""
        results = []
        while self.event_queue:
            event_uri, _payload = self.event_queue.popleft()
            for binding in self._bindings_for(event_uri):
                results.append(self.tick_behavior(binding.tree_uri))
        return results

    def _bindings_for(self, trigger_uri: Term) -> list[BehaviorBinding]:
        bound = self.template.behaviors_for_trigger(trigger_uri)
        bound += [b for b in self._installed_bindings if b.trigger_uri == trigger_uri]
        return bound

    def install_behavior(self, tree: BehaviorTree, trigger_uri: Term) -> Term:
        """Attach a new behavior to this instance only (the template is shared)."""
        tree.validate()
        if trigger_uri not in self.template.events and self.template.goal_by_uri(trigger_uri) is None:
            raise AgentError(f"trigger {trigger_uri.value} is not a declared event or goal")
        root_uri = tree.root_node.uri
        self._installed_trees[root_uri] = tree
        self._installed_bindings.append(
            BehaviorBinding(uri=root_uri, tree_uri=root_uri, trigger_uri=trigger_uri)
        )
        return root_uri

    def behavior_trees(self) -> dict[Term, BehaviorTree]:
        merged = dict(self.template.trees)
        merged.update(self._installed_trees)
        return merged

    def tick_behavior(self, tree_uri: Term) -> TickResult:
        tree = self.template.trees.get(tree_uri) or self._installed_trees.get(tree_uri)
        if tree is None:
            raise AgentError(f"agent {self.name} has no behavior tree {tree_uri.value}")
        with self._tick_lock:
            self.running_behaviors.add(tree_uri)
            try:
                result = tick(tree, _AgentTickContext(self))
            finally:
                self.running_behaviors.discard(tree_uri)
            self.last_trace = result.trace
            self.last_status = result.status
            return result

    # ----------------------------------------------------------------- goals

    def dispatch_goal(self, goal_uri: Term, params: Graph) -> TickStatus:
        goal = self.template.goal_by_uri(goal_uri)
        if goal is None:
            raise AgentError(f"unknown goal {goal_uri.value} on agent {self.name}")
        bindings = self._goal_bindings(goal, params)
        snapshot = self.store.snapshot()
        added = [t for t in params.triples if t not in snapshot.triples]
        self.store.mutate(lambda g: g.triples.update(added))
        self._goal_frames.append(bindings)
        try:
            result = self.tick_behavior(goal.bound_behavior)
        finally:
            self._goal_frames.pop()
            self.store.mutate(lambda g: g.triples.difference_update(added))
        if result.status is TickStatus.RUNNING:
            return TickStatus.RUNNING
        achieved = self.store.query(bind_query(goal.success_condition, bindings))
        return TickStatus.SUCCEEDED if achieved.boolean else TickStatus.FAILED

    def _goal_bindings(self, goal: GoalDefinition, params: Graph) -> dict[str, Term]:
        rows = evaluate(params, goal.parameter_query).rows
        if not rows:
            raise AgentError(
                f"goal {goal.uri.value}: parameter graph does not bind "
                f"{', '.join('?' + v for v in goal.parameter_variables)}"
            )
        return dict(rows[0])

    # --------------------------------------------------------------- actions

    def run_action(self, action_uri: Term, node_uri: Term) -> TickStatus:
        action = self.template.action_by_uri(action_uri)
        if action is None:
            raise AgentError(f"unknown action {action_uri.value} on agent {self.name}")
        pending = self._async_state.get(node_uri.value)
        if isinstance(pending, AsyncCompletion):
            del self._async_state[node_uri.value]
            return self._finish_async(action, pending)
        if pending == "inflight":
            return TickStatus.RUNNING

        bindings = dict(self._goal_frames[-1]) if self._goal_frames else {}
        pre = bind_query(action.precondition, bindings)
        if not self.store.query(pre).boolean:
            self.log.append(f"{action.label or action.uri.value}: precondition false")
            return TickStatus.FAILED

        text_bindings = dict(self.externals)
        text_bindings.update({k: format_pattern_term(v) for k, v in bindings.items()})
        try:
            url = fill_template(action.url_template, text_bindings)
            payload = fill_template(action.payload_template, text_bindings)
        except AgentError as exc:
            self.log.append(str(exc))
            return TickStatus.FAILED

        try:
            response = requests.request(
                action.method,
                url,
                data=payload.encode("utf-8"),
                headers={"Content-Type": "text/turtle", "Accept": "text/turtle"},
                timeout=10.0,
            )
        except requests.RequestException as exc:
            self.log.append(f"{action.label or action.uri.value}: transport failure: {exc}")
            return TickStatus.FAILED
        if response.status_code // 100 != 2:
            self.log.append(
                f"{action.label or action.uri.value}: HTTP {response.status_code}: {response.text}"
            )
            return TickStatus.FAILED

        if action.mode == "async":
            # accepted; the real outcome arrives via deliver_async_response
            self._async_state[node_uri.value] = "inflight"
            return TickStatus.RUNNING
        try:
            incoming = parse_turtle(response.text)
        except TurtleParseError as exc:
            self.log.append(f"{action.label or action.uri.value}: bad response body: {exc}")
            return TickStatus.FAILED
        return self._apply_response(action, bindings, incoming)

    def _apply_response(
        self, action: ActionDefinition, bindings: dict[str, Term], incoming: Graph
    ) -> TickStatus:
        post = bind_query(action.postcondition, bindings)
        outcome: dict[str, TickStatus] = {}

        def commit(g: Graph) -> None:
            candidate = g.copy()
            refresh_beliefs(candidate, incoming)
            if evaluate(candidate, post).boolean:
                refresh_beliefs(g, incoming)
                outcome["status"] = TickStatus.SUCCEEDED
            else:
                # refusing the refresh keeps failed actions free of side effects
                outcome["status"] = TickStatus.FAILED

        self.store.mutate(commit)
        if outcome["status"] is TickStatus.FAILED:
            self.log.append(f"{action.label or action.uri.value}: postcondition false after response")
        return outcome["status"]

    def deliver_async_response(self, node_uri: Term, response: Graph, ok: bool = True) -> None:
        """Completion callback for async actions, keyed by the tree node."""
        if self._async_state.get(node_uri.value) != "inflight":
            raise AgentError(f"no in-flight action at node {node_uri.value}")
        status = TickStatus.SUCCEEDED if ok else TickStatus.FAILED
        self._async_state[node_uri.value] = AsyncCompletion(status=status, response=response)

    def _finish_async(self, action: ActionDefinition, completion: AsyncCompletion) -> TickStatus:
        if completion.status is TickStatus.FAILED:
            return TickStatus.FAILED
        bindings = dict(self._goal_frames[-1]) if self._goal_frames else {}
        return self._apply_response(action, bindings, completion.response or Graph())

    # ------------------------------------------------------------- overview

    def overview(self) -> dict:
        return {
            "name": self.name,
            "uri": self.uri.value,
            "template": self.template.uri.value,
            "endpoints": [e.name for e in self.template.endpoints],
            "goals": [g.uri.value for g in self.template.goals],
            "kb_size": len(self.store),
            "queued_events": len(self.event_queue),
            "running_behaviors": sorted(t.value for t in self.running_behaviors),
            "last_status": self.last_status.value if self.last_status else None,
        }


class AgentRegistry:
    """All live agents in one process; names are unique."""

    def __init__(self):
        self._agents: dict[str, AgentInstance] = {}
        self._lock = threading.Lock()

    def instantiate(
        self, template: AgentTemplate, name: str, externals: Optional[dict] = None
    ) -> AgentInstance:
        template.validate()
        with self._lock:
            if name in self._agents:
                raise AgentError(f"agent name {name!r} already taken")
            agent = AgentInstance(template, name, externals)
            self._agents[name] = agent
            return agent

    def get(self, name: str) -> Optional[AgentInstance]:
        return self._agents.get(name)

    def names(self) -> list[str]:
        return sorted(self._agents)

    def remove(self, name: str) -> None:
        with self._lock:
            self._agents.pop(name, None)
