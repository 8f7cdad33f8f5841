from __future__ import annotations

import random

import pytest

from sbtforge.assets import data_text
from sbtforge.rdf import (
    RDF_TYPE,
    Graph,
    Triple,
    TurtleParseError,
    blank,
    iri,
    literal,
    parse_turtle,
    serialize_turtle,
)
from sbtforge.rdf.terms import XSD_BOOLEAN, XSD_INTEGER


def test_empty_document():
    g = parse_turtle("")
    assert len(g) == 0


def test_single_statement_expands_a():
    g = parse_turtle("@prefix bw: <http://ex.org/bw#> . bw:b1 a bw:Block .")
    assert len(g) == 1
    t = next(iter(g))
    assert t.predicate == RDF_TYPE
    assert t.subject == iri("http://ex.org/bw#b1")
    assert t.object == iri("http://ex.org/bw#Block")


def test_blocksworld_fixture_hand_count():
    # the count is recorded in the fixture header
    g = parse_turtle(data_text("blocksworld.ttl"))
    assert len(g) == 25


def test_boolean_literals_typed():
    g = parse_turtle('@prefix bw: <http://ex.org/bw#> . bw:b1 bw:clear true ; bw:dirty false .')
    objs = {t.object for t in g}
    assert literal("true", XSD_BOOLEAN) in objs
    assert literal("false", XSD_BOOLEAN) in objs


def test_numbers_and_strings_and_lang():
    g = parse_turtle(
        '@prefix ex: <http://ex.org/> . ex:a ex:n 5 ; ex:d 1.25 ; ex:s "hi" ; ex:l "hallo"@de .'
    )
    objs = {t.object for t in g}
    assert literal("5", XSD_INTEGER) in objs
    assert literal("hi") in objs
    assert literal("hallo", lang="de") in objs


def test_object_and_predicate_lists():
    g = parse_turtle(
        "@prefix ex: <http://ex.org/> . ex:a ex:p ex:b, ex:c ; ex:q ex:d ."
    )
    assert len(g) == 3


def test_collection_parses_to_rdf_list():
    g = parse_turtle("@prefix ex: <http://ex.org/> . ex:a ex:items (ex:x ex:y) .")
    head = g.value(iri("http://ex.org/a"), iri("http://ex.org/items"), None)
    assert head is not None
    items = g.rdf_list(head)
    assert items == [iri("http://ex.org/x"), iri("http://ex.org/y")]


def test_blank_node_property_list():
    g = parse_turtle("@prefix ex: <http://ex.org/> . ex:a ex:p [ ex:q ex:b ] .")
    assert len(g) == 2


def test_undefined_prefix_reports_position():
    with pytest.raises(TurtleParseError) as err:
        parse_turtle("nope:a nope:b nope:c .")
    assert "undefined prefix" in str(err.value)
    assert err.value.line == 1


def test_syntax_error_carries_line_and_column():
    with pytest.raises(TurtleParseError) as err:
        parse_turtle("@prefix ex: <http://ex.org/> .\nex:a ex:p .")
    assert err.value.line == 2


def test_escapes_round_trip():
    g = Graph()
    g.bind("ex", "http://ex.org/")
    g.add(iri("http://ex.org/a"), iri("http://ex.org/p"), literal('say "hi"\nok\t\\end'))
    g2 = parse_turtle(serialize_turtle(g))
    assert g2.triples == g.triples


def _random_graph(rng: random.Random) -> Graph:
    g = Graph()
    g.bind("ex", "http://ex.org/")
    subjects = [iri(f"http://ex.org/s{i}") for i in range(4)] + [blank(f"b{i}") for i in range(2)]
    preds = [iri(f"http://ex.org/p{i}") for i in range(3)]
    objects = subjects + [
        literal("x"),
        literal("5", XSD_INTEGER),
        literal("true", XSD_BOOLEAN),
        literal("hallo", lang="de"),
        iri("http://ex.org/o"),
    ]
    for _ in range(rng.randint(0, 15)):
        g.add_triple(Triple(rng.choice(subjects), rng.choice(preds), rng.choice(objects)))
    return g


def test_round_trip_isomorphic_randomized():
    rng = random.Random(20240817)
    for _ in range(40):
        g = _random_graph(rng)
        back = parse_turtle(serialize_turtle(g))
        assert back.isomorphic(g)
        assert back.prefixes == g.prefixes


def test_serialization_deterministic():
    text = data_text("blocksworld.ttl")
    g = parse_turtle(text)
    assert serialize_turtle(g) == serialize_turtle(parse_turtle(text))
