"""Agent templates: declarative agent definitions in RDF.

A template names its endpoints, events, ASK-defined goals, REST-bound
actions, and which behavior tree runs on which trigger. Everything is
parsed up front so a bad template fails at load, not mid-run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from sbtforge.bt.load import TreeLoadError, load_tree
from sbtforge.bt.model import BehaviorTree
from sbtforge.rdf.sparql import QueryForm, SparqlParseError, parse_query
from sbtforge.rdf.terms import RDF_TYPE, RDFS_LABEL, Graph, Term, iri

AGENT = "http://sbtforge.org/vocab/agent#"

TEMPLATE_CLASS = iri(AGENT + "Template")
HAS_ENDPOINT = iri(AGENT + "hasEndpoint")
HAS_EVENT = iri(AGENT + "hasEvent")
HAS_GOAL = iri(AGENT + "hasGoal")
HAS_ACTION = iri(AGENT + "hasAction")
HAS_BEHAVIOR = iri(AGENT + "hasBehavior")
NAME = iri(AGENT + "name")
EVENT = iri(AGENT + "event")
PARAMETER_QUERY = iri(AGENT + "parameterQuery")
SUCCESS_CONDITION = iri(AGENT + "successCondition")
BOUND_BEHAVIOR = iri(AGENT + "boundBehavior")
PRECONDITION = iri(AGENT + "precondition")
POSTCONDITION = iri(AGENT + "postcondition")
METHOD = iri(AGENT + "method")
URL_TEMPLATE = iri(AGENT + "urlTemplate")
PAYLOAD_TEMPLATE = iri(AGENT + "payloadTemplate")
MODE = iri(AGENT + "mode")
TREE = iri(AGENT + "tree")
TRIGGER = iri(AGENT + "trigger")


class TemplateError(ValueError):
    pass


@dataclass
class EndpointDef:
    name: str
    event_uri: Term


@dataclass
class GoalDefinition:
    uri: Term
    label: str
    parameter_query: QueryForm  # SELECT over a request graph -> named parameters
    success_condition: QueryForm  # ASK with parameter variables
    bound_behavior: Term

    @property
    def parameter_variables(self) -> list[str]:
        return list(self.parameter_query.projected)


@dataclass
class ActionDefinition:
    uri: Term
    label: str
    precondition: QueryForm  # ASK with parameter variables
    postcondition: QueryForm
    method: str
    url_template: str
    payload_template: str
    mode: str = "sync"  # sync | async


@dataclass
class BehaviorBinding:
    uri: Term
    tree_uri: Term
    trigger_uri: Term  # a declared event or goal


@dataclass
class AgentTemplate:
    uri: Term
    endpoints: list[EndpointDef] = field(default_factory=list)
    events: list[Term] = field(default_factory=list)
    goals: list[GoalDefinition] = field(default_factory=list)
    actions: list[ActionDefinition] = field(default_factory=list)
    behaviors: list[BehaviorBinding] = field(default_factory=list)
    trees: dict[Term, BehaviorTree] = field(default_factory=dict)
    initial_knowledge: Graph = field(default_factory=Graph)

    def goal_by_uri(self, uri: Term) -> Optional[GoalDefinition]:
        return next((g for g in self.goals if g.uri == uri), None)

    def action_by_uri(self, uri: Term) -> Optional[ActionDefinition]:
        return next((a for a in self.actions if a.uri == uri), None)

    def behaviors_for_trigger(self, trigger: Term) -> list[BehaviorBinding]:
        return [b for b in self.behaviors if b.trigger_uri == trigger]

    def validate(self) -> None:
        names = [e.name for e in self.endpoints]
        if len(names) != len(set(names)):
            raise TemplateError(f"{self.uri.value}: duplicate endpoint names")
        declared = set(self.events) | {g.uri for g in self.goals}
        for b in self.behaviors:
            if b.trigger_uri not in declared:
                raise TemplateError(
                    f"{self.uri.value}: behavior {b.uri.value} bound to undeclared "
                    f"trigger {b.trigger_uri.value}"
                )
            if b.tree_uri not in self.trees:
                raise TemplateError(f"{self.uri.value}: behavior tree {b.tree_uri.value} not loaded")
        for g in self.goals:
            if g.bound_behavior not in self.trees:
                raise TemplateError(
                    f"{self.uri.value}: goal {g.uri.value} bound to missing tree "
                    f"{g.bound_behavior.value}"
                )
            if g.parameter_query.kind != "select":
                raise TemplateError(f"{self.uri.value}: goal {g.uri.value} parameter query must be SELECT")
            if g.success_condition.kind != "ask":
                raise TemplateError(f"{self.uri.value}: goal {g.uri.value} success condition must be ASK")
        for a in self.actions:
            if a.precondition.kind != "ask" or a.postcondition.kind != "ask":
                raise TemplateError(f"{self.uri.value}: action {a.uri.value} pre/postconditions must be ASK")
            if a.mode not in ("sync", "async"):
                raise TemplateError(f"{self.uri.value}: action {a.uri.value} has unknown mode {a.mode!r}")


def _label(graph: Graph, node: Term) -> str:
    value = graph.value(node, RDFS_LABEL, None)
    return value.value if value is not None and value.is_literal else ""


def _required_text(graph: Graph, node: Term, prop: Term, what: str) -> str:
    value = graph.value(node, prop, None)
    if value is None or not value.is_literal:
        raise TemplateError(f"{node.value}: missing {what}")
    return value.value


def _required_query(graph: Graph, node: Term, prop: Term, what: str) -> QueryForm:
    text = _required_text(graph, node, prop, what)
    try:
        return parse_query(text)
    except SparqlParseError as exc:
        raise TemplateError(f"{node.value}: bad {what}: {exc}") from exc


def load_template(
    graph: Graph,
    template_uri: Optional[Term] = None,
    initial_knowledge: Optional[Graph] = None,
) -> AgentTemplate:
    if template_uri is None:
        candidates = graph.subjects(RDF_TYPE, TEMPLATE_CLASS)
        if len(candidates) != 1:
            raise TemplateError(f"expected exactly one agent:Template, found {len(candidates)}")
        template_uri = candidates[0]
    tpl = AgentTemplate(uri=template_uri)
    if initial_knowledge is not None:
        tpl.initial_knowledge = initial_knowledge

    for ep in graph.objects(template_uri, HAS_ENDPOINT):
        tpl.endpoints.append(
            EndpointDef(
                name=_required_text(graph, ep, NAME, "agent:name"),
                event_uri=graph.value(ep, EVENT, None) or _missing(ep, "agent:event"),
            )
        )
    tpl.events = graph.objects(template_uri, HAS_EVENT)
    for goal in graph.objects(template_uri, HAS_GOAL):
        tpl.goals.append(
            GoalDefinition(
                uri=goal,
                label=_label(graph, goal),
                parameter_query=_required_query(graph, goal, PARAMETER_QUERY, "agent:parameterQuery"),
                success_condition=_required_query(graph, goal, SUCCESS_CONDITION, "agent:successCondition"),
                bound_behavior=graph.value(goal, BOUND_BEHAVIOR, None) or _missing(goal, "agent:boundBehavior"),
            )
        )
    for action in graph.objects(template_uri, HAS_ACTION):
        mode = graph.value(action, MODE, None)
        tpl.actions.append(
            ActionDefinition(
                uri=action,
                label=_label(graph, action),
                precondition=_required_query(graph, action, PRECONDITION, "agent:precondition"),
                postcondition=_required_query(graph, action, POSTCONDITION, "agent:postcondition"),
                method=_required_text(graph, action, METHOD, "agent:method"),
                url_template=_required_text(graph, action, URL_TEMPLATE, "agent:urlTemplate"),
                payload_template=_required_text(graph, action, PAYLOAD_TEMPLATE, "agent:payloadTemplate"),
                mode=mode.value if mode is not None else "sync",
            )
        )
    for behavior in graph.objects(template_uri, HAS_BEHAVIOR):
        tpl.behaviors.append(
            BehaviorBinding(
                uri=behavior,
                tree_uri=graph.value(behavior, TREE, None) or _missing(behavior, "agent:tree"),
                trigger_uri=graph.value(behavior, TRIGGER, None) or _missing(behavior, "agent:trigger"),
            )
        )

    tree_uris = {b.tree_uri for b in tpl.behaviors} | {g.bound_behavior for g in tpl.goals}
    for uri in sorted(tree_uris, key=Term.sort_key):
        try:
            tpl.trees[uri] = load_tree(graph, uri)
        except TreeLoadError as exc:
            raise TemplateError(f"{template_uri.value}: {exc}") from exc
    tpl.validate()
    return tpl


def _missing(node: Term, what: str):
    raise TemplateError(f"{node.value}: missing {what}")
