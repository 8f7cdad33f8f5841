"""Random graph/query case generation for oracle-equivalence tests.

Generation is constrained to shapes the parser can actually produce:
every filter variable also occurs in some graph pattern, and CONSTRUCT
templates here stay blank-free so engine and oracle output can be
compared as plain triple sets (blank-label suffixes depend on solution
enumeration order, which the two implementations do not share).
"""

from __future__ import annotations

import random

from sbtforge.rdf.sparql import BoolExpr, Comparison, NotExists, QueryForm, TriplePattern
from sbtforge.rdf.terms import (
    XSD_DECIMAL,
    Graph,
    Term,
    Triple,
    Variable,
    blank,
    boolean,
    integer,
    iri,
    literal,
)

_EX = "http://example.org/"

SUBJECT_POOL = [iri(_EX + n) for n in ("s1", "s2", "s3", "s4")] + [blank("b1"), blank("b2")]
PREDICATE_POOL = [iri(_EX + n) for n in ("p1", "p2", "p3")]
LITERAL_POOL = [
    literal("a"),
    literal("b"),
    integer(1),
    integer(2),
    integer(3),
    literal("2.5", XSD_DECIMAL),
    boolean(True),
    boolean(False),
    literal("hi", lang="en"),
]
OBJECT_POOL = SUBJECT_POOL + LITERAL_POOL
# constants inside query patterns and templates: no blank nodes there
PATTERN_SUBJECTS = [t for t in SUBJECT_POOL if t.is_iri]
PATTERN_OBJECTS = PATTERN_SUBJECTS + LITERAL_POOL
_VAR_NAMES = ["a", "b", "c"]


def random_graph(rng: random.Random) -> Graph:
    g = Graph()
    for _ in range(rng.randint(8, 16)):
        g.add_triple(
            Triple(
                rng.choice(SUBJECT_POOL),
                rng.choice(PREDICATE_POOL),
                rng.choice(OBJECT_POOL),
            )
        )
    return g


def _position_term(rng: random.Random, pool: list[Term], var_budget: list[str], p_var: float):
    if var_budget and rng.random() < p_var:
        return Variable(rng.choice(var_budget))
    return rng.choice(pool)


def _random_patterns(rng: random.Random, count: int, var_budget: list[str]) -> list[TriplePattern]:
    out = []
    for _ in range(count):
        out.append(
            TriplePattern(
                _position_term(rng, PATTERN_SUBJECTS, var_budget, 0.6),
                _position_term(rng, PREDICATE_POOL, var_budget, 0.3),
                _position_term(rng, PATTERN_OBJECTS, var_budget, 0.6),
            )
        )
    return out


def _random_comparison(rng: random.Random, bound: list[str]) -> Comparison:
    op = rng.choice(["=", "!=", "<", ">"])
    left = Variable(rng.choice(bound))
    if rng.random() < 0.5 and len(bound) > 1:
        right = Variable(rng.choice(bound))
    else:
        right = rng.choice(PATTERN_OBJECTS)
    return Comparison(op, left, right)


def _random_filter(rng: random.Random, bound: list[str]):
    roll = rng.random()
    if roll < 0.45:
        return _random_comparison(rng, bound)
    if roll < 0.60:
        parts = [_random_comparison(rng, bound), _random_comparison(rng, bound)]
        return BoolExpr(rng.choice(["&&", "||"]), parts)
    if roll < 0.72:
        return BoolExpr("!", [_random_comparison(rng, bound)])
    # NOT EXISTS over one pattern; at most one fresh inner variable keeps
    # the brute-force oracle inside its time budget
    inner_budget = list(bound)
    if rng.random() < 0.5:
        inner_budget.append("n")
    inner = _random_patterns(rng, 1, inner_budget)
    return NotExists(inner, [])


def random_query(rng: random.Random) -> QueryForm:
    n_vars = rng.choice([1, 2, 2, 2, 3])
    var_budget = _VAR_NAMES[:n_vars]
    patterns = _random_patterns(rng, rng.randint(1, 3), var_budget)
    bound = sorted({v for p in patterns for v in p.variables()})
    filters = []
    if bound:
        for _ in range(rng.choice([0, 0, 1, 1, 2])):
            filters.append(_random_filter(rng, bound))
    kind = rng.choice(["ask", "select", "select", "construct"])
    if kind == "ask":
        return QueryForm(kind="ask", patterns=patterns, filters=filters)
    if kind == "select":
        if not bound:
            return QueryForm(kind="ask", patterns=patterns, filters=filters)
        projected = rng.sample(bound, rng.randint(1, len(bound)))
        return QueryForm(
            kind="select",
            patterns=patterns,
            filters=filters,
            projected=projected,
            distinct=rng.random() < 0.5,
        )
    template_budget = bound if bound else []
    template = []
    for _ in range(rng.randint(1, 2)):
        template.append(
            TriplePattern(
                _position_term(rng, PATTERN_SUBJECTS, template_budget, 0.7),
                _position_term(rng, PREDICATE_POOL, template_budget, 0.2),
                _position_term(rng, PATTERN_OBJECTS, template_budget, 0.7),
            )
        )
    return QueryForm(kind="construct", patterns=patterns, filters=filters, template=template)


def random_case(rng: random.Random) -> tuple[Graph, QueryForm]:
    return random_graph(rng), random_query(rng)
