"""Evaluation of the SPARQL subset against an in-memory graph.

Pattern matching is a straightforward backtracking join over the triple
set. Result rows are sorted by the lexicographic order of their bound
terms so identical inputs always serialize identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from sbtforge.rdf.sparql import (
    BoolExpr,
    Comparison,
    NotExists,
    PatternTerm,
    QueryForm,
    TriplePattern,
)
from sbtforge.rdf.terms import (
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_DOUBLE,
    XSD_INTEGER,
    Graph,
    Term,
    Triple,
    Variable,
    blank,
)

Binding = dict[str, Term]

_NUMERIC = {XSD_INTEGER, XSD_DECIMAL, XSD_DOUBLE}


@dataclass
class UpdateDelta:
    added: list[Triple] = field(default_factory=list)
    removed: list[Triple] = field(default_factory=list)

    @property
    def summary(self) -> str:
        return f"+{len(self.added)}, -{len(self.removed)}"


@dataclass
class QueryResult:
    """Result shaped by the query kind: boolean, rows, graph, or delta."""

    kind: str
    boolean: Optional[bool] = None
    variables: list[str] = field(default_factory=list)
    rows: list[Binding] = field(default_factory=list)
    graph: Optional[Graph] = None
    delta: Optional[UpdateDelta] = None

    @property
    def is_empty(self) -> bool:
        """Empty in the sense that triggers query autocorrection."""
        if self.kind == "select":
            return not self.rows
        if self.kind == "construct":
            return self.graph is None or len(self.graph) == 0
        return False


def _resolve(t: PatternTerm, binding: Binding) -> PatternTerm:
    if isinstance(t, Variable):
        return binding.get(t.name, t)
    return t


def _match_pattern(graph: Graph, pattern: TriplePattern, binding: Binding) -> Iterator[Binding]:
    s = _resolve(pattern.subject, binding)
    p = _resolve(pattern.predicate, binding)
    o = _resolve(pattern.object, binding)
    want_s = s if isinstance(s, Term) else None
    want_p = p if isinstance(p, Term) else None
    want_o = o if isinstance(o, Term) else None
    for t in graph.match(want_s, want_p, want_o):
        row = dict(binding)
        ok = True
        for part, value in ((s, t.subject), (p, t.predicate), (o, t.object)):
            if isinstance(part, Variable):
                if part.name in row and row[part.name] != value:
                    ok = False
                    break
                row[part.name] = value
        if ok:
            yield row


def _solutions(
    graph: Graph,
    patterns: list[TriplePattern],
    filters: list,
    seed: Optional[Binding] = None,
) -> Iterator[Binding]:
    def recurse(idx: int, binding: Binding) -> Iterator[Binding]:
        if idx == len(patterns):
            yield binding
            return
        for row in _match_pattern(graph, patterns[idx], binding):
            yield from recurse(idx + 1, row)

    for candidate in recurse(0, dict(seed or {})):
        if all(_eval_filter(graph, f, candidate) for f in filters):
            yield candidate


def _numeric_value(t: Term) -> float:
    return float(t.value)


def _compare(op: str, left: Term, right: Term) -> bool:
    if left.is_literal and right.is_literal:
        ldt, rdt = left.datatype_iri, right.datatype_iri
        if ldt in _NUMERIC and rdt in _NUMERIC:
            a, b = _numeric_value(left), _numeric_value(right)
        elif ldt == XSD_BOOLEAN and rdt == XSD_BOOLEAN:
            a, b = left.value == "true", right.value == "true"
        else:
            if op == "=":
                return left == right
            if op == "!=":
                return left != right
            a, b = left.value, right.value
    else:
        if op == "=":
            return left == right
        if op == "!=":
            return left != right
        if left.kind != right.kind:
            return False
        a, b = left.value, right.value
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    raise ValueError(f"unknown operator {op}")


def _eval_filter(graph: Graph, f, binding: Binding) -> bool:
    if isinstance(f, Comparison):
        left = _resolve(f.left, binding)
        right = _resolve(f.right, binding)
        if isinstance(left, Variable) or isinstance(right, Variable):
            return False  # unbound variable: treat as error -> row dropped
        return _compare(f.op, left, right)
    if isinstance(f, BoolExpr):
        if f.op == "&&":
            return all(_eval_filter(graph, p, binding) for p in f.parts)
        if f.op == "||":
            return any(_eval_filter(graph, p, binding) for p in f.parts)
        if f.op == "!":
            return not _eval_filter(graph, f.parts[0], binding)
    if isinstance(f, NotExists):
        inner = _solutions(graph, list(f.patterns), list(f.filters), seed=binding)
        return next(inner, None) is None
    raise ValueError(f"unknown filter node {f!r}")


def _row_sort_key(variables: list[str]):
    def key(row: Binding) -> tuple:
        return tuple(
            row[v].sort_key() if v in row else ("", "", "", "") for v in variables
        )

    return key


def _instantiate(
    template: list[TriplePattern],
    binding: Binding,
    blank_suffix: str,
) -> list[Triple]:
    out: list[Triple] = []
    for p in template:
        parts = []
        for t in (p.subject, p.predicate, p.object):
            resolved = _resolve(t, binding)
            if isinstance(resolved, Variable):
                raise ValueError(f"unbound template variable ?{resolved.name}")
            # only blanks written in the template are minted fresh per solution;
            # blanks arriving through variable bindings keep their graph identity
            if isinstance(t, Term) and t.is_blank:
                resolved = blank(f"{resolved.value}{blank_suffix}")
            parts.append(resolved)
        try:
            out.append(Triple(*parts))
        except ValueError:
            continue  # ill-formed instantiation (literal subject etc.) produces nothing
    return out


def evaluate(graph: Graph, form: QueryForm) -> QueryResult:
    """Evaluate a read-form query (ask, select, construct) against `graph`."""
    if form.is_update:
        raise ValueError("evaluate() handles read forms only; use apply_update()")
    if form.kind == "ask":
        found = next(_solutions(graph, form.patterns, form.filters), None)
        return QueryResult(kind="ask", boolean=found is not None)
    if form.kind == "select":
        rows = []
        seen: set[tuple] = set()
        for sol in _solutions(graph, form.patterns, form.filters):
            row = {v: sol[v] for v in form.projected if v in sol}
            if form.distinct:
                fingerprint = tuple(sorted((k, v.sort_key()) for k, v in row.items()))
                if fingerprint in seen:
                    continue
                seen.add(fingerprint)
            rows.append(row)
        rows.sort(key=_row_sort_key(form.projected))
        return QueryResult(kind="select", variables=list(form.projected), rows=rows)
    if form.kind == "construct":
        out = Graph(prefixes=dict(form.prefixes))
        for i, sol in enumerate(_solutions(graph, form.patterns, form.filters)):
            for t in _instantiate(form.template, sol, blank_suffix=f"-c{i}"):
                out.add_triple(t)
        return QueryResult(kind="construct", graph=out)
    raise ValueError(f"unknown query kind {form.kind}")


def _fresh_blank_suffix(graph: Graph, round_no: int) -> str:
    existing = {t.value for tr in graph.triples for t in (tr.subject, tr.object) if t.is_blank}
    suffix = f"-i{round_no}"
    bump = 0
    while any(label.endswith(suffix) for label in existing):
        bump += 1
        suffix = f"-i{round_no}x{bump}"
    return suffix


def apply_update(graph: Graph, form: QueryForm) -> QueryResult:
    """Apply an update in place; deletions land before insertions.

    The returned delta holds only triples that actually changed membership,
    so INSERT DATA of an already-present triple reports +0.
    """
    if not form.is_update:
        raise ValueError("apply_update() requires an update form")
    to_remove: list[Triple] = []
    to_add: list[Triple] = []
    if form.kind == "updateInsertData":
        to_add = _instantiate(form.template, {}, _fresh_blank_suffix(graph, 0))
    else:
        solutions = list(_solutions(graph, form.patterns, form.filters))
        for i, sol in enumerate(solutions):
            if form.delete_template:
                to_remove.extend(_instantiate(form.delete_template, sol, f"-d{i}"))
            if form.template:
                to_add.extend(_instantiate(form.template, sol, _fresh_blank_suffix(graph, i)))
    delta = UpdateDelta()
    for t in to_remove:
        if t in graph.triples:
            graph.discard(t)
            delta.removed.append(t)
    for t in to_add:
        if t not in graph.triples:
            graph.add_triple(t)
            delta.added.append(t)
    delta.removed.sort(key=Triple.sort_key)
    delta.added.sort(key=Triple.sort_key)
    return QueryResult(kind=form.kind, delta=delta)
