"""Tick execution and step debugging.

The interpreter is one generator that yields a checkpoint before every
leaf execution. A plain tick drives it to completion; hitting a
breakpoint parks the generator inside a DebugSession, which then
advances exactly one node per step() call. Composites record their
status after their children (post-order), leaves as they execute.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Generator, Optional

from sbtforge.bt.model import BehaviorTree, BTNode, TickStatus, TraceEntry
from sbtforge.rdf.evaluate import QueryResult, apply_update, evaluate
from sbtforge.rdf.sparql import QueryForm, parse_query
from sbtforge.rdf.terms import Graph, Term


class GraphContext:
    """Tick context over a bare graph; goal/action dispatch is pluggable.

    The agent runtime supplies its own context with the same surface;
    this one covers trees that only read and update a knowledge base.
    """

    def __init__(
        self,
        graph: Graph,
        dispatch_goal: Optional[Callable[[Term, Graph], TickStatus]] = None,
        run_action: Optional[Callable[[Term, Term], TickStatus]] = None,
    ):
        self.graph = graph
        self._dispatch_goal = dispatch_goal
        self._run_action = run_action

    def evaluate(self, form: QueryForm) -> QueryResult:
        return evaluate(self.graph, form)

    def apply(self, form: QueryForm) -> QueryResult:
        return apply_update(self.graph, form)

    def dispatch_goal(self, goal_uri: Term, params: Graph) -> TickStatus:
        if self._dispatch_goal is None:
            raise RuntimeError(f"no goal dispatcher for {goal_uri.value}")
        return self._dispatch_goal(goal_uri, params)

    def run_action(self, action_uri: Term, node_uri: Term) -> TickStatus:
        if self._run_action is None:
            raise RuntimeError(f"no action runner for {action_uri.value}")
        return self._run_action(action_uri, node_uri)


@dataclass
class _Event:
    kind: str  # "about" | "pause"
    node: BTNode


def _record(trace: list, node: BTNode, status: TickStatus, error: str = "") -> TickStatus:
    trace.append(
        TraceEntry(
            node_uri=node.uri,
            status=status,
            timestamp=time.time(),
            kind=node.kind,
            label=node.label,
            error=error,
        )
    )
    return status


def _exec_leaf(node: BTNode, ctx, trace: list) -> TickStatus:
    try:
        if node.kind == "condition":
            result = ctx.evaluate(node.ask_query)
            return _record(trace, node, TickStatus.SUCCEEDED if result.boolean else TickStatus.FAILED)
        if node.kind == "update":
            ctx.apply(node.update_query)
            return _record(trace, node, TickStatus.SUCCEEDED)
        if node.kind == "goalProducer":
            params = ctx.evaluate(node.construct_query).graph or Graph()
            status = ctx.dispatch_goal(node.goal_uri, params)
            return _record(trace, node, status)
        if node.kind == "action":
            status = ctx.run_action(node.action_uri, node.uri)
            return _record(trace, node, status)
    except (ValueError, RuntimeError) as exc:
        return _record(trace, node, TickStatus.FAILED, error=str(exc))
    raise AssertionError(f"unexpected leaf kind {node.kind}")


def _exec(
    node: BTNode, ctx, trace: list, state: dict
) -> Generator[_Event, None, TickStatus]:
    if node.kind == "breakpoint":
        # the breakpoint itself always succeeds; outside a debug session it
        # additionally parks the whole tick
        _record(trace, node, TickStatus.SUCCEEDED)
        if not state["debug"]:
            state["debug"] = True
            yield _Event("pause", node)
        return TickStatus.SUCCEEDED
    if not node.is_composite:
        yield _Event("about", node)
        return _exec_leaf(node, ctx, trace)
    if node.kind in ("root", "sequence"):
        status = TickStatus.SUCCEEDED
        for child in node.children:
            status = yield from _exec(child, ctx, trace, state)
            if status is not TickStatus.SUCCEEDED:
                break
        return _record(trace, node, status)
    if node.kind == "priority":
        status = TickStatus.FAILED
        for child in node.children:
            status = yield from _exec(child, ctx, trace, state)
            if status is not TickStatus.FAILED:
                break
        return _record(trace, node, status)
    raise AssertionError(f"unexpected composite kind {node.kind}")


@dataclass
class TickResult:
    status: TickStatus
    trace: list
    session: Optional["DebugSession"] = None


@dataclass
class StepInfo:
    next_node: Optional[Term]
    status: TickStatus
    done: bool


class DebugStepError(RuntimeError):
    pass


class DebugSession:
    """A suspended tick, advanced one node per step().

    Exposes ad-hoc query evaluation against the agent KB while paused.
    """

    def __init__(self, gen, ctx, trace: list, position: Optional[BTNode]):
        self._gen = gen
        self._ctx = ctx
        self.trace = trace
        self.position = position  # node about to execute; None once finished
        self.final_status: Optional[TickStatus] = None

    @classmethod
    def start(cls, tree: BehaviorTree, ctx) -> "DebugSession":
        """Step-from-the-root debugging; breakpoints become no-ops."""
        trace: list = []
        gen = _exec(tree.root_node, ctx, trace, {"debug": True})
        session = cls(gen, ctx, trace, position=None)
        session._advance()
        return session

    @property
    def done(self) -> bool:
        return self.final_status is not None

    def _advance(self) -> None:
        try:
            event = self._gen.send(None)
            self.position = event.node
        except StopIteration as stop:
            self.position = None
            self.final_status = stop.value

    def step(self) -> StepInfo:
        if self.done:
            raise DebugStepError("debug session already finished")
        self._advance()
        return StepInfo(
            next_node=self.position.uri if self.position else None,
            status=self.final_status or TickStatus.RUNNING,
            done=self.done,
        )

    def run_to_completion(self) -> TickStatus:
        while not self.done:
            self.step()
        return self.final_status

    def query(self, text: str) -> QueryResult:
        """Ad-hoc read query against the knowledge base mid-debug."""
        form = parse_query(text)
        if form.is_update:
            return self._ctx.apply(form)
        return self._ctx.evaluate(form)


def tick(tree: BehaviorTree, ctx) -> TickResult:
    """Run one tick. A breakpoint suspends the run inside a DebugSession
    carried on the result; async leaves surface as a plain running status."""
    trace: list = []
    state = {"debug": False}
    gen = _exec(tree.root_node, ctx, trace, state)
    while True:
        try:
            event = gen.send(None)
        except StopIteration as stop:
            return TickResult(status=stop.value, trace=trace)
        if event.kind == "pause":
            session = DebugSession(gen, ctx, trace, position=None)
            session._advance()  # park right before the next node
            if session.done:
                # breakpoint was the last thing to run: nothing to step, so
                # finish transparently instead of handing back a dead session
                return TickResult(status=session.final_status, trace=trace)
            return TickResult(status=TickStatus.RUNNING, trace=trace, session=session)
