"""Core RDF data model: terms, triples, and an in-memory graph.

Graphs have set semantics (no duplicate triples) and carry their prefix
map so serialization round-trips. Blank-node identity is scoped to a
single graph load; comparing graphs across loads goes through
:meth:`Graph.isomorphic`, which searches for a blank-node bijection.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

XSD = "http://www.w3.org/2001/XMLSchema#"
RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"

XSD_STRING = XSD + "string"
XSD_BOOLEAN = XSD + "boolean"
XSD_INTEGER = XSD + "integer"
XSD_DECIMAL = XSD + "decimal"
XSD_DOUBLE = XSD + "double"

BUILTIN_PREFIXES = {
    "rdf": RDF,
    "rdfs": RDFS,
    "xsd": XSD,
}


@dataclass(frozen=True)
class Term:
    """One RDF term: an IRI, a blank node, or a literal.

    A literal carries at most one of ``datatype_iri`` / ``language_tag``;
    plain literals default to ``xsd:string``.
    """

    kind: str  # "iri" | "blank" | "literal"
    value: str
    datatype_iri: Optional[str] = None
    language_tag: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ("iri", "blank", "literal"):
            raise ValueError(f"unknown term kind: {self.kind!r}")
        if self.kind != "literal" and (self.datatype_iri or self.language_tag):
            raise ValueError(f"{self.kind} terms carry no datatype or language tag")
        if self.datatype_iri and self.language_tag:
            raise ValueError("literal has both a datatype and a language tag")

    @property
    def is_iri(self) -> bool:
        return self.kind == "iri"

    @property
    def is_literal(self) -> bool:
        return self.kind == "literal"

    @property
    def is_blank(self) -> bool:
        return self.kind == "blank"

    def sort_key(self) -> tuple:
        """Total order over terms: IRIs, then blanks, then literals."""
        rank = {"iri": 0, "blank": 1, "literal": 2}[self.kind]
        return (rank, self.value, self.datatype_iri or "", self.language_tag or "")

    def __repr__(self) -> str:
        if self.kind == "iri":
            return f"<{self.value}>"
        if self.kind == "blank":
            return f"_:{self.value}"
        if self.language_tag:
            return f'"{self.value}"@{self.language_tag}'
        if self.datatype_iri and self.datatype_iri != XSD_STRING:
            return f'"{self.value}"^^<{self.datatype_iri}>'
        return f'"{self.value}"'


def iri(value: str) -> Term:
    return Term("iri", value)


def blank(label: str) -> Term:
    return Term("blank", label)


def literal(value: str, datatype: Optional[str] = None, lang: Optional[str] = None) -> Term:
    if lang is not None:
        return Term("literal", value, language_tag=lang)
    return Term("literal", value, datatype_iri=datatype or XSD_STRING)


def boolean(flag: bool) -> Term:
    return literal("true" if flag else "false", XSD_BOOLEAN)


def integer(n: int) -> Term:
    return literal(str(n), XSD_INTEGER)


RDF_TYPE = iri(RDF + "type")
RDF_FIRST = iri(RDF + "first")
RDF_REST = iri(RDF + "rest")
RDF_NIL = iri(RDF + "nil")
RDFS_LABEL = iri(RDFS + "label")
RDFS_DOMAIN = iri(RDFS + "domain")
RDFS_RANGE = iri(RDFS + "range")
RDFS_SUBCLASS = iri(RDFS + "subClassOf")
RDF_PROPERTY = iri(RDF + "Property")


@dataclass(frozen=True)
class Variable:
    """A SPARQL variable; only ever appears in query patterns, never in graphs."""

    name: str

    def __repr__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self) -> None:
        if self.subject.kind == "literal":
            raise ValueError("triple subject must be an IRI or blank node")
        if not self.predicate.is_iri:
            raise ValueError("triple predicate must be an IRI")

    def sort_key(self) -> tuple:
        return (self.subject.sort_key(), self.predicate.sort_key(), self.object.sort_key())


@dataclass
class Graph:
    """A set of triples plus the prefix map used to (de)serialize them."""

    triples: set[Triple] = field(default_factory=set)
    prefixes: dict[str, str] = field(default_factory=dict)

    def add(self, s: Term, p: Term, o: Term) -> None:
        self.triples.add(Triple(s, p, o))

    def add_triple(self, t: Triple) -> None:
        self.triples.add(t)

    def discard(self, t: Triple) -> None:
        self.triples.discard(t)

    def __contains__(self, t: Triple) -> bool:
        return t in self.triples

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def bind(self, prefix: str, namespace: str) -> None:
        self.prefixes[prefix] = namespace

    def match(
        self,
        s: Optional[Term] = None,
        p: Optional[Term] = None,
        o: Optional[Term] = None,
    ) -> list[Triple]:
        """All triples matching the pattern; None is a wildcard. Sorted for determinism."""
        out = [
            t
            for t in self.triples
            if (s is None or t.subject == s)
            and (p is None or t.predicate == p)
            and (o is None or t.object == o)
        ]
        out.sort(key=Triple.sort_key)
        return out

    def value(
        self,
        s: Optional[Term] = None,
        p: Optional[Term] = None,
        o: Optional[Term] = None,
    ) -> Optional[Term]:
        """The missing position of the first matching triple, or None."""
        hits = self.match(s, p, o)
        if not hits:
            return None
        t = hits[0]
        if s is None:
            return t.subject
        if p is None:
            return t.predicate
        return t.object

    def subjects(self, p: Optional[Term] = None, o: Optional[Term] = None) -> list[Term]:
        seen: dict[Term, None] = {}
        for t in self.match(None, p, o):
            seen.setdefault(t.subject, None)
        return sorted(seen, key=Term.sort_key)

    def objects(self, s: Optional[Term] = None, p: Optional[Term] = None) -> list[Term]:
        seen: dict[Term, None] = {}
        for t in self.match(s, p, None):
            seen.setdefault(t.object, None)
        return sorted(seen, key=Term.sort_key)

    def merge(self, other: "Graph") -> None:
        self.triples |= other.triples
        for prefix, ns in other.prefixes.items():
            self.prefixes.setdefault(prefix, ns)

    def copy(self) -> "Graph":
        return Graph(set(self.triples), dict(self.prefixes))

    def rdf_list(self, head: Term) -> list[Term]:
        """Decode an rdf:first/rdf:rest chain starting at `head`."""
        items: list[Term] = []
        node = head
        seen: set[Term] = set()
        while node != RDF_NIL:
            if node in seen:
                raise ValueError(f"cyclic RDF list at {node}")
            seen.add(node)
            first = self.value(node, RDF_FIRST, None)
            rest = self.value(node, RDF_REST, None)
            if first is None or rest is None:
                raise ValueError(f"malformed RDF list at {node}")
            items.append(first)
            node = rest
        return items

    def isomorphic(self, other: "Graph") -> bool:
        """Graph equality up to blank-node renaming."""
        if len(self.triples) != len(other.triples):
            return False
        mine = _ground_partition(self)
        theirs = _ground_partition(other)
        if mine[0] != theirs[0]:
            return False
        my_blanks = sorted({t.value for t in _blank_terms(self)})
        their_blanks = sorted({t.value for t in _blank_terms(other)})
        if len(my_blanks) != len(their_blanks):
            return False
        if not my_blanks:
            return True
        # Desk-scale graphs only: try every bijection. Trees serialized here
        # carry few blanks, so the factorial search never bites.
        if len(my_blanks) > 8:
            raise ValueError("isomorphism check limited to graphs with <= 8 blank nodes")
        their_set = other.triples
        for perm in itertools.permutations(their_blanks):
            mapping = dict(zip(my_blanks, perm))
            if _rename_blanks(self, mapping) == their_set:
                return True
        return False


def _blank_terms(g: Graph) -> Iterable[Term]:
    for t in g.triples:
        if t.subject.is_blank:
            yield t.subject
        if t.object.is_blank:
            yield t.object


def _ground_partition(g: Graph) -> tuple[frozenset, int]:
    ground = frozenset(
        t for t in g.triples if not t.subject.is_blank and not t.object.is_blank
    )
    return ground, len(g.triples) - len(ground)


def _rename_blanks(g: Graph, mapping: dict[str, str]) -> set[Triple]:
    def ren(term: Term) -> Term:
        if term.is_blank:
            return blank(mapping[term.value])
        return term

    return {Triple(ren(t.subject), t.predicate, ren(t.object)) for t in g.triples}
