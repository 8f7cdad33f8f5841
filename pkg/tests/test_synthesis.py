"""Instruction → behavior tree: frames, extraction, action linking,
factory, translation, persistence, and the canonical end-to-end run."""

import json
import math
import re

import pytest

from sbtforge.agents import AgentRegistry, EnvServer, load_template, scene_canonical, scene_purple_occupied
from sbtforge.assets import data_text
from sbtforge.bt.load import load_tree, serialize_tree
from sbtforge.bt.model import ASK_QUERY, CONSTRUCT_QUERY, GOAL, KIND_CLASS
from sbtforge.linking import SynonymDictionary, UnresolvedTermError
from sbtforge.llm import ScriptRule, ScriptedProvider
from sbtforge.queries import fill_prompt
from sbtforge.rdf.sparql import format_query
from sbtforge.rdf.terms import RDF_TYPE, iri
from sbtforge.rdf.turtle import parse_turtle, serialize_turtle
from sbtforge.synthesis import (
    BehaviorStore,
    Frame,
    GoalTemplate,
    NodeFactory,
    SynthesisError,
    build_btf,
    extract,
    extraction_from_json,
    frame_from_json,
    instantiate_template,
    link_action,
    load_btf_examples,
    load_goal_templates,
    persist_offline,
    persist_online,
    synthesize_behavior,
    translate,
)

AG = "http://sbtforge.org/agents/blocksworld#"
BW = "http://sbtforge.org/bw#"

CANONICAL = (
    "Put the blue block on the purple block; "
    "if the purple block is not clear, put it on the orange block."
)
CANONICAL_BTF = {
    "type": "Root",
    "children": [
        {
            "type": "Priority",
            "children": [
                {
                    "type": "Sequence",
                    "children": [
                        {"type": "Condition", "children": []},
                        {"type": "GoalProducer", "children": []},
                    ],
                },
                {"type": "GoalProducer", "children": []},
            ],
        }
    ],
}
# verbs surface as "put"; the stack goal is what they *link* to
CANONICAL_EXTRACTION = {
    "actions": [
        {"verb": "Put", "arguments": ["blue block", "purple block"]},
        {"verb": "put", "arguments": ["blue block", "orange block"]},
    ],
    "conditions": [{"subject": "purple block", "property": "clear", "polarity": "negative-guarded"}],
    "entities": ["blue block", "purple block", "orange block"],
}


class CountingProvider(ScriptedProvider):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.prompts = []
        self.embed_calls = 0

    def _complete_once(self, request):
        self.prompts.append(request.prompt_text())
        return super()._complete_once(request)

    def embed(self, texts):
        self.embed_calls += 1
        return super().embed(texts)


def canonical_provider() -> CountingProvider:
    return CountingProvider(
        rules=[
            ScriptRule(match="You design behavior tree frames.", response=json.dumps(CANONICAL_BTF)),
            ScriptRule(match="You extract goals", response=json.dumps(CANONICAL_EXTRACTION)),
        ]
    )


@pytest.fixture(scope="module")
def template():
    graph = parse_turtle(data_text("blocksworld-agent.ttl"))
    return load_template(graph, initial_knowledge=scene_canonical())


@pytest.fixture()
def dictionary(tmp_path):
    d = SynonymDictionary("tester", directory=tmp_path)
    d.learn("put", iri(AG + "StackGoal"), source="seed")
    return d


def ag(name):
    return iri(AG + name)


# ------------------------------------------------------------------ BTF frames


def test_corpus_has_twenty_validated_examples():
    pairs = load_btf_examples()
    assert len(pairs) == 20
    kinds_seen = set()
    for _instruction, frame in pairs:
        assert frame.kind == "Root"
        kinds_seen.update(f.kind for f in frame.walk())
    assert kinds_seen == {"Root", "Sequence", "Priority", "Condition", "GoalProducer"}
    # coverage: plain sequences, conditional guards, and bare fallbacks
    shapes = [tuple(f.kind for f in frame.walk()) for _i, frame in pairs]
    assert ("Root", "GoalProducer") in shapes
    assert ("Root", "Sequence", "GoalProducer", "GoalProducer") in shapes
    assert ("Root", "Priority", "GoalProducer", "GoalProducer") in shapes
    assert any("Condition" in s and "Priority" in s for s in shapes)


def test_frame_validation_rules():
    frame = frame_from_json(CANONICAL_BTF)
    assert [f.kind for f in frame.walk()] == [
        "Root", "Priority", "Sequence", "Condition", "GoalProducer", "GoalProducer",
    ]
    with pytest.raises(SynthesisError, match="leaf"):
        frame_from_json(
            {"type": "Root", "children": [{"type": "Condition", "children": [{"type": "GoalProducer"}]}]}
        )
    with pytest.raises(SynthesisError, match="top frame must be Root"):
        frame_from_json({"type": "Sequence", "children": [{"type": "Condition"}]})
    with pytest.raises(SynthesisError, match="only appear at the top"):
        frame_from_json({"type": "Root", "children": [{"type": "Root", "children": [{"type": "Condition"}]}]})
    with pytest.raises(SynthesisError, match="at least one child"):
        frame_from_json({"type": "Root", "children": [{"type": "Priority", "children": []}]})
    with pytest.raises(SynthesisError, match="unknown frame kind"):
        frame_from_json({"type": "Selector", "children": []})


def test_build_btf_scripted():
    frame = build_btf(CANONICAL, canonical_provider())
    assert frame == frame_from_json(CANONICAL_BTF)


def test_build_btf_reprompts_on_invalid_structure():
    # first answer is syntactically fine JSON but an illegal frame
    provider = CountingProvider(
        rules=[
            ScriptRule(match="That response was invalid", response=json.dumps(CANONICAL_BTF)),
            ScriptRule(match="You design behavior tree frames.", response='{"type": "Condition", "children": []}'),
        ]
    )
    frame = build_btf(CANONICAL, provider)
    assert frame.kind == "Root"
    assert len(provider.prompts) == 2
    assert "top frame must be Root" in provider.prompts[1]


def test_build_btf_fails_after_second_bad_frame():
    provider = CountingProvider(default='{"type": "Priority", "children": []}')
    with pytest.raises(SynthesisError, match="still invalid after reprompt"):
        build_btf(CANONICAL, provider)
    assert len(provider.prompts) == 2


# ------------------------------------------------------------------ extraction


def test_extract_canonical_fixture():
    result = extract(CANONICAL, canonical_provider())
    assert [a.verb for a in result.actions] == ["Put", "put"]
    assert result.actions[0].arguments == ("blue block", "purple block")
    assert result.actions[1].arguments == ("blue block", "orange block")
    assert [a.order for a in result.actions] == [0, 1]
    assert result.conditions[0].subject == "purple block"
    assert result.conditions[0].prop == "clear"
    assert result.conditions[0].polarity == "negative-guarded"
    assert "orange block" in result.entities


def test_extract_rejects_foreign_surfaces():
    obj = {"actions": [{"verb": "teleport", "arguments": []}], "conditions": [], "entities": []}
    with pytest.raises(SynthesisError, match="does not appear in the instruction"):
        extraction_from_json(obj, "Pick up the blue block.")
    bad_polarity = {
        "actions": [],
        "conditions": [{"subject": "blue block", "property": "clear", "polarity": "inverted"}],
        "entities": [],
    }
    with pytest.raises(SynthesisError, match="polarity"):
        extraction_from_json(bad_polarity, "the blue block is clear")


def test_question_routed_to_synthesis_aborts(template, dictionary):
    provider = CountingProvider(
        rules=[
            ScriptRule(match="You design behavior tree frames.", response='{"type": "Root", "children": [{"type": "GoalProducer", "children": []}]}'),
            ScriptRule(match="You extract goals", response='{"actions": [], "conditions": [], "entities": []}'),
        ]
    )
    with pytest.raises(SynthesisError, match="no actionable verbs"):
        synthesize_behavior("Is the purple block clear?", scene_canonical(), template.goals, provider, dictionary)


# -------------------------------------------------------------- action linking


def test_link_action_exact_label_costs_nothing(template):
    provider = CountingProvider()
    assert link_action("stack", template.goals, None, provider) == ag("StackGoal")
    assert link_action("Pick Up", template.goals, None, provider) == ag("PickUpGoal")
    assert provider.embed_calls == 0


def test_link_action_dictionary_tier(template, dictionary):
    provider = CountingProvider()
    dictionary.learn("grab", ag("PickUpGoal"), source="manual")
    assert link_action("GRAB", template.goals, dictionary, provider) == ag("PickUpGoal")
    assert provider.embed_calls == 0


def test_link_action_embedding_tier_links_and_learns(template, dictionary):
    provider = CountingProvider(
        embedding_overrides={
            "grasp": [0.8, 0.6, 0.0, 0.0, 0.0],
            "pick up": [1.0, 0.0, 0.0, 0.0, 0.0],
            "put down": [0.0, 0.0, 1.0, 0.0, 0.0],
            "stack": [0.0, 0.0, 0.0, 1.0, 0.0],
            "unstack": [0.0, 0.0, 0.0, 0.0, 1.0],
        }
    )
    assert link_action("grasp", template.goals, dictionary, provider) == ag("PickUpGoal")
    assert provider.embed_calls == 1
    assert dictionary.lookup("grasp") == ag("PickUpGoal")
    # second resolution rides the dictionary, not the embedder
    assert link_action("grasp", template.goals, dictionary, provider) == ag("PickUpGoal")
    assert provider.embed_calls == 1


LIFT_OVERRIDES = {
    "lift": [1.0, 0.0, 0.0, 0.0, 0.0],
    "stack": [0.42, math.sqrt(1 - 0.42**2), 0.0, 0.0, 0.0],
    "pick up": [0.0, 0.0, 1.0, 0.0, 0.0],
    "put down": [0.0, 0.0, 0.0, 1.0, 0.0],
    "unstack": [0.0, 0.0, 0.0, 0.0, 1.0],
}


def test_link_action_below_bar_asks_user(template, dictionary):
    provider = CountingProvider(embedding_overrides=LIFT_OVERRIDES)
    seen = {}

    def ask(surface, candidates):
        seen["surface"] = surface
        seen["candidates"] = candidates
        return 1  # the second-ranked goal

    chosen = link_action("lift", template.goals, dictionary, provider, ask_user=ask)
    assert seen["surface"] == "lift"
    best = seen["candidates"][0]
    assert best.uri == ag("StackGoal")
    assert abs(best.confidence - 0.42) < 1e-3  # the pinned borderline score
    assert chosen == seen["candidates"][1].uri
    assert dictionary.lookup("lift") == chosen


def test_link_action_unresolved_without_user(template):
    provider = CountingProvider(embedding_overrides=LIFT_OVERRIDES)
    with pytest.raises(UnresolvedTermError, match="0.42"):
        link_action("lift", template.goals, None, provider)
    with pytest.raises(UnresolvedTermError, match="declined"):
        link_action("lift", template.goals, None, provider, ask_user=lambda s, c: None)


# ----------------------------------------------------------- factory/templates


def test_factory_emits_only_five_kinds():
    factory = NodeFactory("http://sbtforge.org/behaviors/t#")
    uri, fragment = factory.make("Condition", ask_query="ASK { <urn:a> <urn:b> true }")
    assert fragment.value(uri, RDF_TYPE, None) == KIND_CLASS["condition"]
    assert "urn:a" in fragment.value(uri, ASK_QUERY, None).value

    gp_uri, gp = factory.make(
        "GoalProducer",
        goal=ag("StackGoal"),
        construct_query="CONSTRUCT { <urn:a> <urn:b> <urn:c> } WHERE { }",
    )
    assert gp.value(gp_uri, GOAL, None) == ag("StackGoal")
    assert gp.value(gp_uri, CONSTRUCT_QUERY, None) is not None
    assert gp_uri != uri

    with pytest.raises(SynthesisError, match="does not emit"):
        factory.make("Update")
    with pytest.raises(SynthesisError, match="ask_query"):
        factory.make("Condition")
    with pytest.raises(SynthesisError, match="does not parse"):
        factory.make("Condition", ask_query="ASK { broken")
    with pytest.raises(SynthesisError, match="expected a ASK"):
        factory.make("Condition", ask_query="SELECT ?x WHERE { ?x <urn:b> true }")


def test_goal_templates_cover_all_goals(template):
    templates = load_goal_templates()
    assert set(templates) == {g.uri for g in template.goals}
    stack = templates[ag("StackGoal")]
    assert stack.roles == ("BLOCK_X", "BLOCK_Y")
    text = instantiate_template(stack, [iri(BW + "blueBlock"), iri(BW + "purpleBlock")])
    assert f"<{BW}blueBlock>" in text and f"<{BW}purpleBlock>" in text
    assert "<BLOCK" not in text


def test_template_instantiation_errors():
    stack = load_goal_templates()[ag("StackGoal")]
    with pytest.raises(SynthesisError, match="takes 2"):
        instantiate_template(stack, [iri(BW + "blueBlock")])
    leaky = GoalTemplate(
        goal_uri=ag("StackGoal"),
        construct_template="CONSTRUCT { <BLOCK_X> <urn:p> <BLOCK_Z> } WHERE { }",
        roles=("BLOCK_X",),
    )
    with pytest.raises(SynthesisError, match=re.escape("<BLOCK_Z>")):
        instantiate_template(leaky, [iri(BW + "blueBlock")])


# ----------------------------------------------------------------- translation


def entity_links():
    return {
        "blue block": iri(BW + "blueBlock"),
        "purple block": iri(BW + "purpleBlock"),
        "orange block": iri(BW + "orangeBlock"),
    }


def canonical_tree(name="canonical"):
    frame = frame_from_json(CANONICAL_BTF)
    extraction = extraction_from_json(CANONICAL_EXTRACTION, CANONICAL)
    links = [ag("StackGoal"), ag("StackGoal")]
    return translate(frame, extraction, links, entity_links(), name=name)


def test_translate_single_goal_producer():
    frame = frame_from_json({"type": "Root", "children": [{"type": "GoalProducer", "children": []}]})
    extraction = extraction_from_json(
        {"actions": [{"verb": "Pick up", "arguments": ["blue block"]}], "conditions": [], "entities": ["blue block"]},
        "Pick up the blue block.",
    )
    tree = translate(frame, extraction, [ag("PickUpGoal")], entity_links(), name="pickup-blue")
    leaf = tree.root_node.children[0]
    assert leaf.kind == "goalProducer"
    assert leaf.goal_uri == ag("PickUpGoal")
    assert f"<{BW}blueBlock>" in format_query(leaf.construct_query)


def test_translate_canonical_shape_and_queries():
    tree = canonical_tree()
    kinds = [n.kind for n in tree.nodes()]
    assert kinds == ["root", "priority", "sequence", "condition", "goalProducer", "goalProducer"]
    condition = tree.nodes()[3]
    # negative-guarded: the ASK stays positive, the Priority handles the "not"
    assert f"<{BW}purpleBlock> <{BW}clear> true" in format_query(condition.ask_query).replace("\n", " ").replace("  ", " ")
    first, second = tree.nodes()[4], tree.nodes()[5]
    assert f"<{BW}purpleBlock>" in format_query(first.construct_query)
    assert f"<{BW}orangeBlock>" in format_query(second.construct_query)
    # factory closure + template totality over the serialized graph
    serialized = serialize_turtle(serialize_tree(tree))
    assert not re.search(r"<[A-Za-z0-9]+_[A-Za-z0-9]+>", serialized)
    for node in tree.nodes():
        assert node.kind in ("root", "sequence", "priority", "condition", "goalProducer")


def test_translate_negative_polarity_asks_false():
    frame = frame_from_json(
        {"type": "Root", "children": [{"type": "Sequence", "children": [
            {"type": "Condition", "children": []}, {"type": "GoalProducer", "children": []}]}]}
    )
    extraction = extraction_from_json(
        {
            "actions": [{"verb": "pick up", "arguments": ["blue block"]}],
            "conditions": [{"subject": "purple block", "property": "clear", "polarity": "negative"}],
            "entities": ["blue block", "purple block"],
        },
        "If the purple block is not clear, pick up the blue block.",
    )
    tree = translate(frame, extraction, [ag("PickUpGoal")], entity_links(), name="neg")
    condition = tree.nodes()[2]
    assert f"<{BW}clear> false" in format_query(condition.ask_query).replace("\n", " ").replace("  ", " ")


def test_translate_counts_must_match():
    frame = frame_from_json(CANONICAL_BTF)
    extraction = extraction_from_json(
        {"actions": [{"verb": "Put", "arguments": ["blue block", "purple block"]}],
         "conditions": [{"subject": "purple block", "property": "clear", "polarity": "negative-guarded"}],
         "entities": []},
        CANONICAL,
    )
    with pytest.raises(SynthesisError, match="2 goal leaves"):
        translate(frame, extraction, [ag("StackGoal")], entity_links())


def test_translate_unknown_property_needs_fallback():
    frame = frame_from_json(
        {"type": "Root", "children": [{"type": "Sequence", "children": [
            {"type": "Condition", "children": []}, {"type": "GoalProducer", "children": []}]}]}
    )
    extraction = extraction_from_json(
        {
            "actions": [{"verb": "pick up", "arguments": ["blue block"]}],
            "conditions": [{"subject": "blue block", "property": "heavy", "polarity": "positive"}],
            "entities": ["blue block"],
        },
        "If the blue block is heavy, pick up the blue block.",
    )
    with pytest.raises(SynthesisError, match="no ASK rule"):
        translate(frame, extraction, [ag("PickUpGoal")], entity_links(), name="f")

    fallback_ask = f"ASK {{ <{BW}blueBlock> <{BW}weight> true }}"
    tree = translate(
        frame, extraction, [ag("PickUpGoal")], entity_links(), name="f",
        condition_fallback=lambda phrase, entity: fallback_ask,
    )
    assert "weight" in format_query(tree.nodes()[2].ask_query)


def test_translated_tree_matches_pinned_golden():
    generated = canonical_tree()
    graph = parse_turtle(open("tests/data/canonical-tree.ttl").read())
    golden_root = graph.subjects(RDF_TYPE, KIND_CLASS["root"])[0]
    golden = load_tree(graph, golden_root)

    def same(a, b):
        assert a.kind == b.kind and a.label == b.label
        assert a.goal_uri == b.goal_uri and a.action_uri == b.action_uri
        for attr in ("ask_query", "update_query", "construct_query"):
            qa, qb = getattr(a, attr), getattr(b, attr)
            assert (qa is None) == (qb is None)
            if qa is not None:
                assert format_query(qa) == format_query(qb)
        assert len(a.children) == len(b.children)
        for ca, cb in zip(a.children, b.children):
            same(ca, cb)

    same(generated.root_node, golden.root_node)


# ------------------------------------------------------------------ end to end


@pytest.mark.parametrize(
    "scene_fn,expected_support",
    [(scene_canonical, "purpleBlock"), (scene_purple_occupied, "orangeBlock")],
    ids=["purple-clear", "purple-covered"],
)
def test_canonical_instruction_executes(scene_fn, expected_support, tmp_path):
    graph = parse_turtle(data_text("blocksworld-agent.ttl"))
    template = load_template(graph, initial_knowledge=scene_fn())
    dictionary = SynonymDictionary("e2e", directory=tmp_path)
    dictionary.learn("put", ag("StackGoal"), source="seed")
    provider = canonical_provider()
    with EnvServer(scene_fn()) as env:
        agent = AgentRegistry().instantiate(template, "bw", externals={"env": env.url})
        outcome = synthesize_behavior(
            CANONICAL, agent.store.snapshot(), template.goals, provider, dictionary
        )
        root_uri, results = persist_online(outcome.tree, agent, ag("userCommandEvent"))
        assert [r.status.value for r in results] == ["succeeded"]
        # the new tree itself shows up in the trace
        assert any(e.node_uri == outcome.tree.root_node.uri for e in results[0].trace)
        world = env.world_snapshot()
        assert world.value(iri(BW + "blueBlock"), iri(BW + "on"), None) == iri(BW + expected_support)


# ----------------------------------------------------------------- persistence


def test_offline_persist_round_trip(tmp_path):
    tree = canonical_tree(name="canonical")
    store = BehaviorStore(tmp_path / "behaviors")
    messages = []
    root = persist_offline(tree, store, announce=messages.append)
    assert root == tree.root_node.uri
    assert messages and "canonical" in messages[0]
    loaded = store.load("canonical")
    assert [n.kind for n in loaded.nodes()] == [n.kind for n in tree.nodes()]
    assert loaded.root_node.uri == tree.root_node.uri


def test_store_suffixes_duplicate_names(tmp_path):
    store = BehaviorStore(tmp_path)
    tree = canonical_tree(name="canonical")
    first = store.save(tree)
    second = store.save(tree)
    assert first.name == "canonical.ttl"
    assert second.name == "canonical-2.ttl"
    assert store.names() == ["canonical", "canonical-2"]


def test_store_missing_name(tmp_path):
    with pytest.raises(SynthesisError, match="no stored behavior"):
        BehaviorStore(tmp_path).load("ghost")
