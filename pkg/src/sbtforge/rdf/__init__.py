"""RDF data model, Turtle I/O, and a SPARQL subset engine."""

from sbtforge.rdf.terms import (
    RDF_FIRST,
    RDF_NIL,
    RDF_REST,
    RDF_TYPE,
    RDFS_LABEL,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_INTEGER,
    XSD_STRING,
    Graph,
    Term,
    Triple,
    Variable,
    blank,
    iri,
    literal,
)
from sbtforge.rdf.turtle import TurtleParseError, parse_turtle, serialize_turtle
from sbtforge.rdf.sparql import (
    FilterExpr,
    NotExists,
    QueryForm,
    SparqlParseError,
    TriplePattern,
    UnsupportedSparqlError,
    bind_query,
    format_query,
    parse_query,
)
from sbtforge.rdf.evaluate import QueryResult, UpdateDelta, apply_update, evaluate
from sbtforge.rdf.store import TripleStore
from sbtforge.rdf.remote import RemoteEndpoint, RemoteQueryError, remote_query

__all__ = [
    "Term", "Triple", "Variable", "Graph", "iri", "blank", "literal",
    "RDF_TYPE", "RDF_FIRST", "RDF_REST", "RDF_NIL", "RDFS_LABEL",
    "XSD_BOOLEAN", "XSD_INTEGER", "XSD_DECIMAL", "XSD_STRING",
    "parse_turtle", "serialize_turtle", "TurtleParseError",
    "parse_query", "bind_query", "format_query", "QueryForm", "TriplePattern", "FilterExpr",
    "NotExists", "SparqlParseError", "UnsupportedSparqlError",
    "evaluate", "apply_update", "QueryResult", "UpdateDelta",
    "TripleStore", "RemoteEndpoint", "RemoteQueryError", "remote_query",
]
