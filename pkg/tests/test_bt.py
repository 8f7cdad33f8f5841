"""Behavior-tree engine: composite semantics against a closed-form
oracle, RDF round-trips, breakpoint debugging, and leaf behavior."""

import itertools

import pytest

from sbtforge.assets import data_text
from sbtforge.bt import (
    BehaviorTree,
    BTNode,
    DebugSession,
    DebugStepError,
    GraphContext,
    TickStatus,
    TreeLoadError,
    load_tree,
    serialize_tree,
    tick,
)
from sbtforge.bt.model import SBT
from sbtforge.rdf import Graph, Triple, parse_query, parse_turtle, serialize_turtle, iri
from sbtforge.rdf.terms import RDF_FIRST, RDF_REST, RDF_NIL

S, F, R = TickStatus.SUCCEEDED, TickStatus.FAILED, TickStatus.RUNNING

EX = "http://sbtforge.org/examples/sbt#"


def ask(text):
    return parse_query(text)


def condition(n, query_text):
    return BTNode(uri=iri(f"urn:t:{n}"), kind="condition", ask_query=ask(query_text))


def update(n, query_text):
    return BTNode(uri=iri(f"urn:t:{n}"), kind="update", update_query=parse_query(query_text))


def wrap(child_or_children, kind="sequence"):
    children = child_or_children if isinstance(child_or_children, list) else [child_or_children]
    comp = BTNode(uri=iri("urn:t:comp"), kind=kind, children=children)
    root = BTNode(uri=iri("urn:t:root"), kind="root", children=[comp])
    return BehaviorTree(root_node=root, name="t")


# ------------------------------------------------ composite truth tables


def sequence_oracle(statuses):
    for s in statuses:
        if s is not S:
            return s
    return S


def priority_oracle(statuses):
    for s in statuses:
        if s is not F:
            return s
    return F


def scripted(kind, statuses):
    leaves = [
        BTNode(uri=iri(f"urn:t:leaf{i}"), kind="action", action_uri=iri(f"urn:t:act{i}"))
        for i in range(len(statuses))
    ]
    tree = wrap(leaves, kind=kind)
    by_node = {leaf.uri: st for leaf, st in zip(leaves, statuses)}
    ctx = GraphContext(Graph(), run_action=lambda action, node: by_node[node])
    return tree, ctx


def test_composite_truth_tables_exhaustive():
    oracles = {"sequence": sequence_oracle, "priority": priority_oracle}
    for kind, oracle in oracles.items():
        for k in (1, 2, 3):
            for combo in itertools.product((S, F, R), repeat=k):
                tree, ctx = scripted(kind, combo)
                result = tick(tree, ctx)
                assert result.status is oracle(combo), (kind, combo)
                # short-circuit: children after the deciding one never tick
                decided = next(
                    (i for i, s in enumerate(combo) if s is not {"sequence": S, "priority": F}[kind]),
                    k - 1,
                )
                leaf_entries = [e for e in result.trace if e.kind == "action"]
                assert len(leaf_entries) == decided + 1, (kind, combo)


def test_root_passes_through_child_status():
    for status in (S, F, R):
        tree, ctx = scripted("sequence", [status])
        assert tick(tree, ctx).status is status


def test_priority_false_then_true_ticks_both():
    tree = wrap(
        [condition("c1", "ASK { FILTER(1 = 2) }"), condition("c2", "ASK {}")],
        kind="priority",
    )
    result = tick(tree, GraphContext(Graph()))
    assert result.status is S
    ticked = [e.node_uri.value for e in result.trace if e.kind == "condition"]
    assert ticked == ["urn:t:c1", "urn:t:c2"]


def test_sequence_condition_then_update_leaves_triple():
    g = Graph()
    tree = wrap(
        [
            condition("c", "ASK {}"),
            update("u", "INSERT DATA { <urn:t:s> <urn:t:p> <urn:t:o> }"),
        ]
    )
    result = tick(tree, GraphContext(g))
    assert result.status is S
    assert Triple(iri("urn:t:s"), iri("urn:t:p"), iri("urn:t:o")) in g


def test_goal_producer_dispatches_instantiated_params(blocksworld_graph):
    captured = {}

    def dispatch(goal_uri, params):
        captured["goal"] = goal_uri
        captured["params"] = params
        return S

    producer = BTNode(
        uri=iri("urn:t:gp"),
        kind="goalProducer",
        goal_uri=iri("urn:t:stackGoal"),
        construct_query=parse_query(
            "PREFIX bw: <http://sbtforge.org/bw#> "
            "CONSTRUCT { _:r bw:movedBlock ?x } WHERE { ?x bw:color \"blue\" }"
        ),
    )
    tree = wrap(producer)
    result = tick(tree, GraphContext(blocksworld_graph, dispatch_goal=dispatch))
    assert result.status is S
    assert captured["goal"] == iri("urn:t:stackGoal")
    hits = captured["params"].match(None, iri("http://sbtforge.org/bw#movedBlock"), None)
    assert [t.object for t in hits] == [iri("http://sbtforge.org/bw#blueBlock")]


def test_leaf_errors_become_failed_with_trace_entry():
    producer = BTNode(
        uri=iri("urn:t:gp"),
        kind="goalProducer",
        goal_uri=iri("urn:t:g"),
        construct_query=parse_query("CONSTRUCT { ?s ?p ?o } WHERE { ?s ?p ?o }"),
    )
    result = tick(wrap(producer), GraphContext(Graph()))  # no dispatcher installed
    assert result.status is F
    entry = next(e for e in result.trace if e.kind == "goalProducer")
    assert entry.status is F
    assert "dispatcher" in entry.error


# ---------------------------------------------------------- RDF round-trip


def same_query(a, b):
    if a is None or b is None:
        return a is b
    return (a.kind, a.patterns, a.filters, a.template, a.delete_template, a.projected, a.distinct) == (
        b.kind, b.patterns, b.filters, b.template, b.delete_template, b.projected, b.distinct
    )


def same_structure(a: BTNode, b: BTNode) -> bool:
    if (a.uri, a.kind, a.label, a.goal_uri, a.action_uri) != (b.uri, b.kind, b.label, b.goal_uri, b.action_uri):
        return False
    for mine, theirs in (
        (a.ask_query, b.ask_query),
        (a.update_query, b.update_query),
        (a.construct_query, b.construct_query),
    ):
        if not same_query(mine, theirs):
            return False
    if len(a.children) != len(b.children):
        return False
    return all(same_structure(x, y) for x, y in zip(a.children, b.children))


def test_load_vocabulary_example_file():
    g = parse_turtle(data_text("sbt-vocab.ttl"))
    tree = load_tree(g, iri(EX + "demoRoot"))
    assert tree.name == "vocabulary demo"
    seq = tree.root_node.children[0]
    assert seq.kind == "sequence"
    assert [c.kind for c in seq.children] == [
        "condition", "priority", "update", "goalProducer", "action", "breakpoint",
    ]
    assert seq.children[1].children[0].label == "purple block is clear"
    assert seq.children[3].goal_uri == iri("http://sbtforge.org/bw#StackGoal")
    assert seq.children[3].construct_query.kind == "construct"


def test_serialize_single_condition_list_shape():
    tree = wrap(condition("c", "ASK {}"))
    g = serialize_tree(tree)
    # exactly one list cell chain of length 1 under the composite
    firsts = g.match(None, RDF_FIRST, None)
    rests = g.match(None, RDF_REST, None)
    assert len([t for t in firsts if t.object == iri("urn:t:c")]) == 1
    assert len([t for t in rests if t.object == RDF_NIL]) == len(rests) == 2  # comp list + root list
    for t in g:
        assert not t.subject.is_blank and not t.object.is_blank


def test_round_trip_preserves_structure():
    g = parse_turtle(data_text("sbt-vocab.ttl"))
    tree = load_tree(g, iri(EX + "demoRoot"))
    reloaded = load_tree(serialize_tree(tree), iri(EX + "demoRoot"))
    assert same_structure(tree.root_node, reloaded.root_node)


def test_serialization_is_idempotent_and_deterministic():
    g = parse_turtle(data_text("sbt-vocab.ttl"))
    tree = load_tree(g, iri(EX + "demoRoot"))
    once = serialize_tree(tree)
    again = serialize_tree(load_tree(once, iri(EX + "demoRoot")))
    assert serialize_turtle(once) == serialize_turtle(again)


def test_cycle_detection():
    g = Graph()
    g.bind("sbt", SBT)
    text = f"""
    @prefix sbt: <{SBT}> .
    @prefix ex: <{EX}> .
    ex:r a sbt:Root ; sbt:hasChildren ( ex:s ) .
    ex:s a sbt:Sequence ; sbt:hasChildren ( ex:s ) .
    """
    with pytest.raises(TreeLoadError) as err:
        load_tree(parse_turtle(text), iri(EX + "r"))
    assert "cycle" in str(err.value)


def test_missing_property_names_the_node():
    text = f"""
    @prefix sbt: <{SBT}> .
    @prefix ex: <{EX}> .
    ex:r a sbt:Root ; sbt:hasChildren ( ex:c ) .
    ex:c a sbt:Condition .
    """
    with pytest.raises(TreeLoadError) as err:
        load_tree(parse_turtle(text), iri(EX + "r"))
    assert EX + "c" in str(err.value)


def test_query_parse_failure_names_the_node():
    text = f"""
    @prefix sbt: <{SBT}> .
    @prefix ex: <{EX}> .
    ex:r a sbt:Root ; sbt:hasChildren ( ex:c ) .
    ex:c a sbt:Condition ; sbt:askQuery "ASK {{ busted" .
    """
    with pytest.raises(TreeLoadError) as err:
        load_tree(parse_turtle(text), iri(EX + "r"))
    assert EX + "c" in str(err.value) and "askQuery" in str(err.value)


def test_load_rejects_non_root_entry():
    g = parse_turtle(data_text("sbt-vocab.ttl"))
    with pytest.raises(TreeLoadError) as err:
        load_tree(g, iri(EX + "demoSeq"))
    assert "root" in str(err.value)


# ------------------------------------------------------------- debugging


def three_step_tree(with_breakpoint: bool):
    children = [
        update("u1", "INSERT DATA { <urn:t:a> <urn:t:p> <urn:t:o> }"),
        update("u2", "INSERT DATA { <urn:t:b> <urn:t:p> <urn:t:o> }"),
        condition("check", "ASK { <urn:t:b> <urn:t:p> <urn:t:o> }"),
    ]
    if with_breakpoint:
        children.insert(1, BTNode(uri=iri("urn:t:bp"), kind="breakpoint"))
    return wrap(children)


def test_breakpoint_suspends_then_steps_to_same_outcome():
    g_plain = Graph()
    plain = tick(three_step_tree(False), GraphContext(g_plain))
    assert plain.status is S

    g_debug = Graph()
    result = tick(three_step_tree(True), GraphContext(g_debug))
    assert result.status is R
    session = result.session
    assert session is not None
    # positioned before the node after the breakpoint
    assert session.position.uri == iri("urn:t:u2")
    final = session.run_to_completion()
    assert final is S
    assert g_debug.triples == g_plain.triples
    visible = [(e.node_uri, e.status) for e in session.trace if e.kind != "breakpoint"]
    reference = [(e.node_uri, e.status) for e in plain.trace]
    assert visible == reference


def test_debug_session_inspects_kb_between_steps():
    result = tick(three_step_tree(True), GraphContext(Graph()))
    session = result.session
    assert session.query("ASK { <urn:t:a> <urn:t:p> <urn:t:o> }").boolean is True
    assert session.query("ASK { <urn:t:b> <urn:t:p> <urn:t:o> }").boolean is False
    info = session.step()  # executes u2
    assert info.done is False
    assert session.query("ASK { <urn:t:b> <urn:t:p> <urn:t:o> }").boolean is True


def test_step_from_start_matches_plain_tick():
    g_plain, g_step = Graph(), Graph()
    plain = tick(three_step_tree(False), GraphContext(g_plain))
    session = DebugSession.start(three_step_tree(False), GraphContext(g_step))
    steps = 0
    while not session.done:
        leaf_before = len(session.trace)
        session.step()
        steps += 1
        assert len(session.trace) >= leaf_before  # grows monotonically
    assert session.final_status is plain.status
    assert [(e.node_uri, e.status) for e in session.trace] == [
        (e.node_uri, e.status) for e in plain.trace
    ]
    assert steps == 3  # one per leaf
    assert g_step.triples == g_plain.triples


def test_step_after_completion_raises():
    session = DebugSession.start(three_step_tree(False), GraphContext(Graph()))
    session.run_to_completion()
    with pytest.raises(DebugStepError):
        session.step()


def test_trailing_breakpoint_finishes_transparently():
    tree = wrap([condition("c", "ASK {}"), BTNode(uri=iri("urn:t:bp"), kind="breakpoint")])
    result = tick(tree, GraphContext(Graph()))
    assert result.status is S
    assert result.session is None
