"""Instruction → executable behavior tree.

The pipeline mirrors how a user phrases a task: a few-shot prompted
*frame* gives the tree shape (composites plus bare Condition/GoalProducer
leaves), a second completion extracts verbs, arguments, and guards, and
translation marries the two by document order — the i-th frame leaf of a
kind takes the i-th extracted item of that kind. Actions resolve to agent
goals through three tiers (exact label, synonym dictionary, embedding
similarity); goal templates then stamp linked entities into CONSTRUCT
requests. Nodes come exclusively from the factory, which only knows the
five generated kinds — generated trees can never contain update, action,
or breakpoint nodes.

Polarity of a guard is three-valued. "positive" and "negative" translate
directly into ASK queries on the stored boolean; "negative-guarded" marks
a negated phrase whose negation is already realized structurally (the
fallback branch of a Priority), so its in-place ASK stays positive.
"""

from __future__ import annotations

import functools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from sbtforge.agents.runtime import AgentInstance
from sbtforge.agents.template import GoalDefinition
from sbtforge.assets import data_text
from sbtforge.bt.load import load_tree, serialize_tree
from sbtforge.bt.tick import TickResult
from sbtforge.bt.model import (
    ASK_QUERY,
    CONSTRUCT_QUERY,
    GOAL,
    HAS_CHILDREN,
    KIND_CLASS,
    LABEL,
    SBT,
    BehaviorTree,
)
from sbtforge.linking import (
    LinkCandidate,
    SynonymDictionary,
    UnresolvedTermError,
    build_index,
    link,
    needs_disambiguation,
)
from sbtforge.llm import ChatRequest, Provider, cosine
from sbtforge.queries import build_filter, fill_prompt, generate_query, prompt_template, prune_ontology
from sbtforge.rdf.sparql import SparqlParseError, parse_query
from sbtforge.rdf.terms import (
    RDF_FIRST,
    RDF_NIL,
    RDF_REST,
    RDF_TYPE,
    Graph,
    Term,
    iri,
    literal,
)
from sbtforge.rdf.turtle import parse_turtle, serialize_turtle

BW = "http://sbtforge.org/bw#"
TPL = "http://sbtforge.org/templates#"
SYNTH_NS = "http://sbtforge.org/behaviors/"

FRAME_KINDS = ("Root", "Sequence", "Priority", "Condition", "GoalProducer")
COMPOSITE_FRAMES = ("Root", "Sequence", "Priority")
LEAF_FRAMES = ("Condition", "GoalProducer")
POLARITIES = ("positive", "negative", "negative-guarded")

SIMILARITY_THRESHOLD = 0.5

_PLACEHOLDER = re.compile(r"<([A-Za-z0-9]+_[A-Za-z0-9]+)>")


class SynthesisError(RuntimeError):
    """Anything that stops an instruction from becoming a runnable tree."""


# ------------------------------------------------------------------ BTF frames


@dataclass(frozen=True)
class Frame:
    kind: str
    children: tuple = ()

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    def leaves(self) -> list["Frame"]:
        return [f for f in self.walk() if f.kind in LEAF_FRAMES]


def frame_from_json(obj, top: bool = True) -> Frame:
    if not isinstance(obj, dict):
        raise SynthesisError(f"frame must be an object, got {type(obj).__name__}")
    kind = obj.get("type")
    if kind not in FRAME_KINDS:
        raise SynthesisError(f"unknown frame kind {kind!r}")
    raw_children = obj.get("children", [])
    if not isinstance(raw_children, list):
        raise SynthesisError(f"{kind}: children must be a list")
    children = tuple(frame_from_json(c, top=False) for c in raw_children)
    if top and kind != "Root":
        raise SynthesisError(f"top frame must be Root, got {kind}")
    if not top and kind == "Root":
        raise SynthesisError("Root may only appear at the top")
    if kind == "Root" and len(children) != 1:
        raise SynthesisError("Root needs exactly one child")
    if kind in ("Sequence", "Priority") and not children:
        raise SynthesisError(f"{kind} needs at least one child")
    if kind in LEAF_FRAMES and children:
        raise SynthesisError(f"{kind} is a leaf and cannot have children")
    return Frame(kind=kind, children=children)


def frame_to_json(frame: Frame) -> dict:
    return {"type": frame.kind, "children": [frame_to_json(c) for c in frame.children]}


@functools.lru_cache(maxsize=1)
def load_btf_examples() -> tuple:
    """The shipped instruction–frame corpus, validated on load."""
    pairs = []
    for line in data_text("btf-examples.jsonl").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        pairs.append((record["instruction"], frame_from_json(record["btf"])))
    return tuple(pairs)


def _validated_json(provider: Provider, request: ChatRequest, validate: Callable):
    """Run a jsonObject completion and apply a structural validator; a
    violation earns one corrective reprompt before failing for good."""
    text = provider.complete(request)
    try:
        return validate(json.loads(text))
    except SynthesisError as exc:
        follow = ChatRequest(
            system_prompt=request.system_prompt,
            messages=tuple(request.messages)
            + (
                ("assistant", text),
                ("user", f"That response was invalid: {exc}. Answer again with one corrected JSON object."),
            ),
            expectation="jsonObject",
            tier=request.tier,
        )
        text = provider.complete(follow)
        try:
            return validate(json.loads(text))
        except SynthesisError as exc2:
            raise SynthesisError(f"still invalid after reprompt: {exc2}") from exc2


def build_btf(instruction: str, provider: Provider) -> Frame:
    examples = "\n".join(
        f"Instruction: {text}\nTree: {json.dumps(frame_to_json(frame))}"
        for text, frame in load_btf_examples()
    )
    prompt = fill_prompt(prompt_template("btf-generation"), examples=examples, instruction=instruction)
    request = ChatRequest(
        system_prompt="You design behavior tree frames.",
        messages=(("user", prompt),),
        expectation="jsonObject",
    )
    return _validated_json(provider, request, frame_from_json)


# ------------------------------------------------------------------ extraction


@dataclass(frozen=True)
class ActionPhrase:
    verb: str
    arguments: tuple
    order: int


@dataclass(frozen=True)
class ConditionPhrase:
    subject: str
    prop: str
    polarity: str


@dataclass(frozen=True)
class ExtractionResult:
    actions: tuple
    conditions: tuple
    entities: tuple


def extraction_from_json(obj, instruction: str) -> ExtractionResult:
    if not isinstance(obj, dict):
        raise SynthesisError("extraction must be a JSON object")
    folded = instruction.casefold()

    def surface(value, what: str) -> str:
        if not isinstance(value, str) or not value:
            raise SynthesisError(f"{what} must be a non-empty string")
        if value.casefold() not in folded:
            raise SynthesisError(f"{what} {value!r} does not appear in the instruction")
        return value

    for key in ("actions", "conditions", "entities"):
        if not isinstance(obj.get(key), list):
            raise SynthesisError(f"missing or non-list {key!r}")
    actions = []
    for i, item in enumerate(obj["actions"]):
        if not isinstance(item, dict) or not isinstance(item.get("arguments"), list):
            raise SynthesisError(f"action {i} must be an object with an arguments list")
        actions.append(
            ActionPhrase(
                verb=surface(item.get("verb"), f"action {i} verb"),
                arguments=tuple(surface(a, f"action {i} argument") for a in item["arguments"]),
                order=i,
            )
        )
    conditions = []
    for i, item in enumerate(obj["conditions"]):
        if not isinstance(item, dict):
            raise SynthesisError(f"condition {i} must be an object")
        polarity = item.get("polarity")
        if polarity not in POLARITIES:
            raise SynthesisError(f"condition {i} polarity must be one of {POLARITIES}, got {polarity!r}")
        conditions.append(
            ConditionPhrase(
                subject=surface(item.get("subject"), f"condition {i} subject"),
                prop=surface(item.get("property"), f"condition {i} property"),
                polarity=polarity,
            )
        )
    entities = tuple(surface(e, "entity") for e in obj["entities"])
    return ExtractionResult(actions=tuple(actions), conditions=tuple(conditions), entities=entities)


def extract(instruction: str, provider: Provider) -> ExtractionResult:
    prompt = fill_prompt(prompt_template("goal-extraction"), instruction=instruction)
    request = ChatRequest(
        system_prompt="You extract goals and entities from instructions.",
        messages=(("user", prompt),),
        expectation="jsonObject",
    )
    return _validated_json(provider, request, lambda obj: extraction_from_json(obj, instruction))


# -------------------------------------------------------------- action linking


def link_action(
    verb: str,
    goals: Sequence[GoalDefinition],
    dictionary: Optional[SynonymDictionary],
    provider: Provider,
    ask_user: Optional[Callable] = None,
) -> Term:
    """Three tiers: exact label match, synonym dictionary, then embedding
    similarity with a 0.5 bar. A similarity link is remembered in the
    dictionary; anything weaker goes to the user."""
    folded = verb.casefold()
    for goal in goals:
        if goal.label.casefold() == folded:
            return goal.uri

    known = {g.uri for g in goals}
    if dictionary is not None:
        hit = dictionary.lookup(verb)
        if hit is not None and hit in known:
            return hit

    labels = [g.label for g in goals]
    vectors = provider.embed([verb] + labels)
    scores = [cosine(vectors[0], v) for v in vectors[1:]]
    ranked = sorted(zip(goals, scores), key=lambda p: (-p[1], p[0].uri.value))
    best_goal, best = ranked[0]
    if best > SIMILARITY_THRESHOLD:
        if dictionary is not None:
            dictionary.learn(verb, best_goal.uri, source="embedding")
        return best_goal.uri

    candidates = [
        LinkCandidate(surface_form=verb, uri=g.uri, label=g.label, confidence=s)
        for g, s in ranked
    ]
    if ask_user is None:
        raise UnresolvedTermError(
            f"action {verb!r} unresolved: best similarity {best:.2f} is below {SIMILARITY_THRESHOLD}"
        )
    choice = ask_user(verb, candidates)
    if choice is None or not 0 <= choice < len(candidates):
        raise UnresolvedTermError(f"user declined to resolve action {verb!r}")
    chosen = candidates[choice]
    if dictionary is not None:
        dictionary.learn(verb, chosen.uri, source="disambiguation")
    return chosen.uri


# --------------------------------------------------------------- goal templates


@dataclass(frozen=True)
class GoalTemplate:
    goal_uri: Term
    construct_template: str
    roles: tuple


@functools.lru_cache(maxsize=1)
def load_goal_templates() -> Mapping[Term, GoalTemplate]:
    graph = parse_turtle(data_text("goal-templates.ttl"))
    out = {}
    for subject in sorted(graph.subjects(RDF_TYPE, iri(TPL + "GoalTemplate")), key=lambda t: t.value):
        goal = graph.value(subject, iri(SBT + "goal"), None)
        text = graph.value(subject, CONSTRUCT_QUERY, None)
        roles_head = graph.value(subject, iri(TPL + "roles"), None)
        if goal is None or text is None or roles_head is None:
            raise SynthesisError(f"goal template {subject.value} is incomplete")
        roles = tuple(t.value for t in graph.rdf_list(roles_head))
        out[goal] = GoalTemplate(goal_uri=goal, construct_template=text.value, roles=roles)
    return out


def instantiate_template(template: GoalTemplate, entities: Sequence[Term]) -> str:
    if len(entities) != len(template.roles):
        raise SynthesisError(
            f"goal {template.goal_uri.value} takes {len(template.roles)} "
            f"entities ({', '.join(template.roles)}), got {len(entities)}"
        )
    text = template.construct_template
    for role, entity in zip(template.roles, entities):
        token = f"<{role}>"
        if token not in text:
            raise SynthesisError(f"template for {template.goal_uri.value} lacks placeholder {token}")
        text = text.replace(token, f"<{entity.value}>")
    residue = _PLACEHOLDER.search(text)
    if residue:
        raise SynthesisError(f"unreplaced placeholder {residue.group(0)} in goal template")
    return text


# ---------------------------------------------------------------- node factory


class NodeFactory:
    """Mints node fragments under a behavior namespace. Knows only the
    five generated kinds; children of composites are attached later."""

    KINDS = FRAME_KINDS

    def __init__(self, base: str):
        self.base = base
        self._counter = 0

    def _fresh(self, kind: str) -> Term:
        self._counter += 1
        return iri(f"{self.base}{kind[0].lower()}{kind[1:]}-{self._counter}")

    def make(
        self,
        kind: str,
        *,
        ask_query: Optional[str] = None,
        goal: Optional[Term] = None,
        construct_query: Optional[str] = None,
        label: str = "",
    ) -> tuple[Term, Graph]:
        if kind not in self.KINDS:
            raise SynthesisError(f"factory does not emit {kind!r} nodes")
        uri = self._fresh(kind)
        fragment = Graph()
        fragment.add(uri, RDF_TYPE, KIND_CLASS[kind[0].lower() + kind[1:]])
        if label:
            fragment.add(uri, LABEL, literal(label))
        if kind == "Condition":
            if ask_query is None:
                raise SynthesisError("Condition requires ask_query")
            self._check(ask_query, "ask", uri)
            fragment.add(uri, ASK_QUERY, literal(ask_query))
        elif kind == "GoalProducer":
            if goal is None or construct_query is None:
                raise SynthesisError("GoalProducer requires goal and construct_query")
            self._check(construct_query, "construct", uri)
            fragment.add(uri, GOAL, goal)
            fragment.add(uri, CONSTRUCT_QUERY, literal(construct_query))
        return uri, fragment

    @staticmethod
    def _check(text: str, expected: str, uri: Term) -> None:
        try:
            form = parse_query(text)
        except SparqlParseError as exc:
            raise SynthesisError(f"{uri.value}: generated query does not parse: {exc}") from exc
        if form.kind != expected:
            raise SynthesisError(f"{uri.value}: expected a {expected.upper()} query, got {form.kind}")


# ----------------------------------------------------------------- translation


def _condition_ask(
    phrase: ConditionPhrase,
    entity_links: Mapping[str, Term],
    fallback: Optional[Callable] = None,
) -> str:
    entity = entity_links.get(phrase.subject)
    if entity is None:
        raise SynthesisError(f"condition subject {phrase.subject!r} is not linked")
    # negation of a guarded phrase lives in the tree structure, not the query
    positive = phrase.polarity != "negative"
    value = "true" if positive else "false"
    prop = phrase.prop.casefold()
    if prop == "clear":
        return f"ASK {{ <{entity.value}> <{BW}clear> {value} }}"
    if prop in ("on table", "on the table"):
        return f"ASK {{ <{entity.value}> <{BW}onTable> {value} }}"
    if fallback is not None:
        return fallback(phrase, entity)
    raise SynthesisError(f"no ASK rule for property {phrase.prop!r} and no generator configured")


def translate(
    btf: Frame,
    extraction: ExtractionResult,
    action_links: Sequence[Term],
    entity_links: Mapping[str, Term],
    *,
    name: str = "behavior",
    templates: Optional[Mapping[Term, GoalTemplate]] = None,
    condition_fallback: Optional[Callable] = None,
) -> BehaviorTree:
    """BTF × extraction → loaded tree. Leaves pair with extraction items
    of their kind in document order; any count mismatch aborts."""
    templates = templates if templates is not None else load_goal_templates()
    leaves = btf.leaves()
    want_conditions = sum(1 for f in leaves if f.kind == "Condition")
    want_actions = sum(1 for f in leaves if f.kind == "GoalProducer")
    if want_conditions != len(extraction.conditions) or want_actions != len(extraction.actions):
        raise SynthesisError(
            f"frame has {want_conditions} condition and {want_actions} goal leaves but "
            f"extraction found {len(extraction.conditions)} and {len(extraction.actions)}"
        )
    if len(action_links) != len(extraction.actions):
        raise SynthesisError("need exactly one goal link per extracted action")

    factory = NodeFactory(f"{SYNTH_NS}{name}#")
    graph = Graph()
    graph.bind("sbt", SBT)
    conditions = iter(extraction.conditions)
    actions = iter(zip(extraction.actions, action_links))

    def entity(surface: str) -> Term:
        uri = entity_links.get(surface)
        if uri is None:
            raise SynthesisError(f"entity {surface!r} is not linked")
        return uri

    def emit(frame: Frame) -> Term:
        if frame.kind == "Condition":
            phrase = next(conditions)
            ask = _condition_ask(phrase, entity_links, condition_fallback)
            uri, fragment = factory.make("Condition", ask_query=ask, label=f"{phrase.subject} {phrase.prop}")
            graph.merge(fragment)
            return uri
        if frame.kind == "GoalProducer":
            phrase, goal_uri = next(actions)
            template = templates.get(goal_uri)
            if template is None:
                raise SynthesisError(f"no goal template for {goal_uri.value}")
            construct = instantiate_template(template, [entity(s) for s in phrase.arguments])
            uri, fragment = factory.make(
                "GoalProducer",
                goal=goal_uri,
                construct_query=construct,
                label=f"{phrase.verb}({', '.join(phrase.arguments)})",
            )
            graph.merge(fragment)
            return uri
        uri, fragment = factory.make(frame.kind, label=name if frame.kind == "Root" else "")
        graph.merge(fragment)
        child_uris = [emit(child) for child in frame.children]
        cells = [iri(f"{uri.value}-list-{i}") for i in range(len(child_uris))]
        graph.add(uri, HAS_CHILDREN, cells[0])
        for i, (cell, child) in enumerate(zip(cells, child_uris)):
            graph.add(cell, RDF_FIRST, child)
            graph.add(cell, RDF_REST, cells[i + 1] if i + 1 < len(cells) else RDF_NIL)
        return uri

    root_uri = emit(btf)
    return load_tree(graph, root_uri)


# ----------------------------------------------------------------- persistence


class BehaviorStore:
    """File-backed behavior store: one Turtle file per tree under the
    store directory. Name collisions get a counter suffix."""

    def __init__(self, directory):
        self.directory = Path(directory)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise SynthesisError(f"behavior store unreachable: {exc}") from exc

    def save(self, tree: BehaviorTree) -> Path:
        name = _slug(tree.name or "behavior")
        path = self.directory / f"{name}.ttl"
        counter = 2
        while path.exists():
            path = self.directory / f"{name}-{counter}.ttl"
            counter += 1
        try:
            path.write_text(serialize_turtle(serialize_tree(tree)), encoding="utf-8")
        except OSError as exc:
            raise SynthesisError(f"behavior store unreachable: {exc}") from exc
        return path

    def load(self, name: str) -> BehaviorTree:
        path = self.directory / f"{name}.ttl"
        if not path.exists():
            raise SynthesisError(f"no stored behavior named {name!r}")
        graph = parse_turtle(path.read_text(encoding="utf-8"))
        roots = graph.subjects(RDF_TYPE, KIND_CLASS["root"])
        if len(roots) != 1:
            raise SynthesisError(f"{path} holds {len(roots)} root nodes, expected 1")
        return load_tree(graph, roots[0])

    def names(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.ttl"))


def persist_offline(tree: BehaviorTree, store: BehaviorStore, announce: Optional[Callable] = None) -> Term:
    path = store.save(tree)
    if announce is not None:
        announce(f"Saved behavior '{tree.name}' to {path}")
    return tree.root_node.uri


def persist_online(tree: BehaviorTree, agent: AgentInstance, trigger_uri: Term) -> tuple[Term, list]:
    """Install on the live agent, bind to the trigger event, execute."""
    uri = agent.install_behavior(tree, trigger_uri)
    agent.fire_event(trigger_uri)
    results: list[TickResult] = agent.run_pending()
    return uri, results


# -------------------------------------------------------------------- workflow


def _slug(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.casefold()).strip("-")
    return slug[:48].strip("-") or "behavior"


@dataclass
class SynthesisOutcome:
    instruction: str
    btf: Frame
    extraction: ExtractionResult
    tree: BehaviorTree
    name: str
    action_links: list = field(default_factory=list)
    entity_links: dict = field(default_factory=dict)


def _provider_condition_ask(kb: Graph, provider: Provider) -> Callable:
    snippet = prune_ontology(kb, build_filter(kb))

    def fallback(phrase: ConditionPhrase, entity: Term) -> str:
        question = f"Is the {phrase.subject} {phrase.prop}?"
        return generate_query(question, snippet, provider)

    return fallback


def synthesize_behavior(
    instruction: str,
    kb: Graph,
    goals: Sequence[GoalDefinition],
    provider: Provider,
    dictionary: Optional[SynonymDictionary] = None,
    *,
    name: Optional[str] = None,
    ask_user: Optional[Callable] = None,
    templates: Optional[Mapping[Term, GoalTemplate]] = None,
) -> SynthesisOutcome:
    """Full pipeline; raises SynthesisError when the instruction has no
    actionable content (e.g. a question routed here by mistake)."""
    btf = build_btf(instruction, provider)
    extraction = extract(instruction, provider)
    if not extraction.actions:
        raise SynthesisError(
            "the instruction contains no actionable verbs — it reads like a question, not a command"
        )

    action_links = [
        link_action(a.verb, goals, dictionary, provider, ask_user) for a in extraction.actions
    ]

    surfaces: list[str] = []
    for action in extraction.actions:
        surfaces.extend(s for s in action.arguments if s not in surfaces)
    for condition in extraction.conditions:
        if condition.subject not in surfaces:
            surfaces.append(condition.subject)
    index = build_index(kb)
    linked = link(surfaces, index, dictionary, kind="entity")
    entity_links: dict[str, Term] = {}
    for surface in surfaces:
        candidates = linked[surface]
        if not needs_disambiguation(candidates):
            entity_links[surface] = candidates[0].uri
        elif ask_user is not None and candidates:
            choice = ask_user(surface, candidates)
            if choice is None or not 0 <= choice < len(candidates):
                raise UnresolvedTermError(f"user declined to resolve {surface!r}")
            entity_links[surface] = candidates[choice].uri
            if dictionary is not None:
                dictionary.learn(surface, candidates[choice].uri, source="disambiguation")
        else:
            raise UnresolvedTermError(f"cannot link entity {surface!r}")

    name = name or _slug(instruction)
    tree = translate(
        btf,
        extraction,
        action_links,
        entity_links,
        name=name,
        templates=templates,
        condition_fallback=_provider_condition_ask(kb, provider),
    )
    return SynthesisOutcome(
        instruction=instruction,
        btf=btf,
        extraction=extraction,
        tree=tree,
        name=name,
        action_links=action_links,
        entity_links=entity_links,
    )
