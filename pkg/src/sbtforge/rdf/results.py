"""SPARQL results wire format (application/sparql-results+json).

Used on both sides of the protocol: the service encodes local results
with it and the remote client decodes them back into
:class:`QueryResult`, so a round trip through HTTP is lossless.
"""

from __future__ import annotations

import json
from typing import Any

from sbtforge.rdf.evaluate import QueryResult
from sbtforge.rdf.terms import XSD_STRING, Term, blank, iri, literal


def term_to_json(term: Term) -> dict[str, str]:
    if term.is_iri:
        return {"type": "uri", "value": term.value}
    if term.is_blank:
        return {"type": "bnode", "value": term.value}
    out: dict[str, str] = {"type": "literal", "value": term.value}
    if term.language_tag:
        out["xml:lang"] = term.language_tag
    elif term.datatype_iri and term.datatype_iri != XSD_STRING:
        out["datatype"] = term.datatype_iri
    return out


def json_to_term(doc: dict[str, str]) -> Term:
    kind = doc.get("type")
    if kind == "uri":
        return iri(doc["value"])
    if kind == "bnode":
        return blank(doc["value"])
    if kind in ("literal", "typed-literal"):
        return literal(doc["value"], doc.get("datatype"), doc.get("xml:lang"))
    raise ValueError(f"unknown term type in results document: {kind!r}")


def result_to_json(result: QueryResult) -> dict[str, Any]:
    if result.kind == "ask":
        return {"head": {}, "boolean": bool(result.boolean)}
    if result.kind == "select":
        bindings = [
            {var: term_to_json(row[var]) for var in result.variables if var in row}
            for row in result.rows
        ]
        return {"head": {"vars": list(result.variables)}, "results": {"bindings": bindings}}
    raise ValueError(f"no JSON results form for kind {result.kind!r}")


def result_to_json_bytes(result: QueryResult) -> bytes:
    # sort_keys keeps the serialized document byte-stable
    return json.dumps(result_to_json(result), sort_keys=True).encode("utf-8")


def json_to_result(doc: dict[str, Any]) -> QueryResult:
    if "boolean" in doc:
        return QueryResult(kind="ask", boolean=bool(doc["boolean"]))
    if "results" not in doc or "bindings" not in doc["results"]:
        raise ValueError("malformed results document: no boolean and no bindings")
    variables = list(doc.get("head", {}).get("vars", []))
    rows = [
        {var: json_to_term(cell) for var, cell in row.items()}
        for row in doc["results"]["bindings"]
    ]
    return QueryResult(kind="select", variables=variables, rows=rows)
