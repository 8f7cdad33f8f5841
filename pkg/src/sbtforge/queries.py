"""Question answering over the KB: Bloom-filtered ontology pruning,
SPARQL generation through the provider, an execute-and-autocorrect loop,
and natural-language answer synthesis.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from sbtforge.assets import data_text
from sbtforge.linking import LinkCandidate
from sbtforge.llm import ChatRequest, Provider
from sbtforge.rdf.evaluate import QueryResult, evaluate
from sbtforge.rdf.sparql import SparqlParseError, UnsupportedSparqlError, parse_query
from sbtforge.rdf.terms import RDF_TYPE, RDFS_LABEL, Graph, Term, iri
from sbtforge.rdf.turtle import format_term, serialize_turtle

DEFAULT_FP_RATE = 0.01
DEFAULT_BUDGET = 8192
MAX_CORRECTIONS = 3

ASK_LEADERS = ("is", "are", "does", "can")

RDFS = "http://www.w3.org/2000/01/rdf-schema#"
SCHEMA_PREDICATES = {
    RDF_TYPE,
    RDFS_LABEL,
    iri(RDFS + "domain"),
    iri(RDFS + "range"),
    iri(RDFS + "subClassOf"),
    iri(RDFS + "subPropertyOf"),
    iri(RDFS + "comment"),
}

_PLACERS = re.compile(r"\{(question|ontology|query|error|form|outcome|examples|instruction|context)\}")


class QueryWorkflowError(RuntimeError):
    def __init__(self, message: str, query: str = "", attempts: int = 0):
        super().__init__(message)
        self.query = query
        self.attempts = attempts


def fill_prompt(template: str, **values: str) -> str:
    # named substitution that leaves unrelated braces (SPARQL!) alone
    return _PLACERS.sub(lambda m: values.get(m.group(1), m.group(0)), template)


def prompt_template(name: str) -> str:
    return data_text("prompts", f"{name}.txt")


# ---------------------------------------------------------------- bloom filter


class BloomFilter:
    """Standard Bloom filter sized from (n, p): m = ceil(-n ln p / (ln 2)^2)
    bits and k = round((m/n) ln 2) double-hashed probes. No false
    negatives, ever; false positives bounded near p."""

    def __init__(self, n: int, p: float):
        if not 0.0 < p < 1.0:
            raise ValueError(f"false-positive rate must be in (0, 1), got {p}")
        self.n = n
        self.p = p
        if n == 0:
            self.m, self.k = 1, 1
        else:
            self.m = math.ceil(-n * math.log(p) / math.log(2) ** 2)
            self.k = max(1, round(self.m / n * math.log(2)))
        self._bits = bytearray((self.m + 7) // 8)
        self.inserted = 0

    def _probes(self, key: str):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        h1 = int.from_bytes(digest[:8], "big")
        h2 = int.from_bytes(digest[8:16], "big") | 1
        for i in range(self.k):
            yield (h1 + i * h2) % self.m

    def add(self, key: str) -> None:
        for pos in self._probes(key):
            self._bits[pos // 8] |= 1 << (pos % 8)
        self.inserted += 1

    def contains(self, key: str) -> bool:
        return all(self._bits[pos // 8] & (1 << (pos % 8)) for pos in self._probes(key))


def _canonical_object(term: Term) -> str:
    if term.is_literal:
        return format_term(term)
    return term.value


def pair_key(predicate: Term, obj: Term) -> str:
    # null byte cannot occur in an IRI or a serialized literal
    return f"{predicate.value}\u0000{_canonical_object(obj)}"


def observed_pairs(kb: Graph) -> set[str]:
    return {pair_key(t.predicate, t.object) for t in kb.triples}


def build_filter(kb: Graph, p: float = DEFAULT_FP_RATE) -> BloomFilter:
    pairs = observed_pairs(kb)
    bloom = BloomFilter(n=len(pairs), p=p)
    for key in sorted(pairs):
        bloom.add(key)
    return bloom


# ------------------------------------------------------------ ontology pruning


@dataclass
class OntologySnippet:
    graph: Graph
    text: str
    budget: int

    @property
    def byte_size(self) -> int:
        return len(self.text.encode("utf-8"))


def prune_ontology(
    kb: Graph,
    bloom: BloomFilter,
    linked: Sequence[LinkCandidate] = (),
    budget: int = DEFAULT_BUDGET,
) -> OntologySnippet:
    """Keep (a) every triple touching a linked URI and (b) schema-style
    triples whose predicate-object pair the filter has seen, then trim to
    the byte budget with the linked triples first in line."""
    linked_uris = {c.uri for c in linked}

    def mentions_linked(t) -> bool:
        return t.subject in linked_uris or t.predicate in linked_uris or t.object in linked_uris

    primary, secondary = [], []
    for t in sorted(kb.triples, key=lambda t: t.sort_key()):
        if mentions_linked(t):
            primary.append(t)
        elif t.predicate in SCHEMA_PREDICATES and bloom.contains(pair_key(t.predicate, t.object)):
            secondary.append(t)

    graph = Graph()
    lines: list[str] = []
    used = 0
    for t in primary + secondary:
        line = f"{format_term(t.subject)} {format_term(t.predicate)} {format_term(t.object)} ."
        cost = len(line.encode("utf-8")) + (1 if lines else 0)  # newline
        if used + cost > budget:
            continue
        lines.append(line)
        used += cost
        graph.add_triple(t)
    return OntologySnippet(graph=graph, text="\n".join(lines), budget=budget)


# ------------------------------------------------------------ query generation


def ask_intent(question: str) -> bool:
    tokens = question.strip().lower().split()
    return bool(tokens) and tokens[0] in ASK_LEADERS


def generate_query(question: str, snippet: OntologySnippet, provider: Provider) -> str:
    form = "ASK" if ask_intent(question) else "SELECT"
    prompt = fill_prompt(prompt_template("sparql-generation"), question=question, ontology=snippet.text, form=form)
    request = ChatRequest(system_prompt="You write SPARQL queries.", messages=(("user", prompt),))
    return provider.complete(request).strip()


# ----------------------------------------------------------------- autocorrect


@dataclass
class AutocorrectContext:
    kb: Graph
    question: str = ""
    ontology: str = ""


def _try_run(text: str, kb: Graph) -> tuple[Optional[QueryResult], Optional[str]]:
    try:
        form = parse_query(text)
        return evaluate(kb, form), None
    except (SparqlParseError, UnsupportedSparqlError, ValueError) as exc:
        return None, str(exc)


def autocorrect(
    query_text: str,
    error_message: Optional[str],
    context: AutocorrectContext,
    provider: Provider,
    max_iterations: int = MAX_CORRECTIONS,
) -> tuple[str, QueryResult, int]:
    """Execute; on failure or an empty result, ask the correction tier for
    a fix, up to max_iterations times. Returns (query, result, provider
    calls). A query that stays empty after the budget is a legitimate
    empty answer; one that never executes raises."""
    result, error = _try_run(query_text, context.kb)
    if result is not None and not result.is_empty:
        return query_text, result, 0
    best_empty: Optional[tuple[str, QueryResult]] = (query_text, result) if result is not None else None
    last_error = error_message or error or "query returned no results"

    template = prompt_template("sparql-correction")
    for attempt in range(1, max_iterations + 1):
        prompt = fill_prompt(
            template,
            query=query_text,
            error=last_error,
            ontology=context.ontology,
            question=context.question,
        )
        request = ChatRequest(
            system_prompt="You fix SPARQL queries.", messages=(("user", prompt),), tier="correction"
        )
        query_text = provider.complete(request).strip()
        result, error = _try_run(query_text, context.kb)
        if result is not None and not result.is_empty:
            return query_text, result, attempt
        if result is not None:
            best_empty = (query_text, result)
            last_error = "query executed but returned no results"
        else:
            last_error = error
    if best_empty is not None:
        return best_empty[0], best_empty[1], max_iterations
    raise QueryWorkflowError(
        f"autocorrection exhausted after {max_iterations} iterations: {last_error}",
        query=query_text,
        attempts=max_iterations,
    )


# ------------------------------------------------------------ answer synthesis

NO_RESULTS_ANSWER = "No results were found for that question."


def render_result(result: QueryResult) -> str:
    if result.kind == "ask":
        return "yes" if result.boolean else "no"
    if result.kind == "select":
        lines = []
        for row in result.rows:
            lines.append("; ".join(f"{var}: {format_term(row[var])}" for var in result.variables if var in row))
        return "\n".join(lines)
    return serialize_turtle(result.graph)


def synthesize_answer(question: str, result: QueryResult, provider: Provider) -> str:
    if result.kind == "select" and not result.rows:
        return NO_RESULTS_ANSWER
    outcome = render_result(result)
    prompt = fill_prompt(prompt_template("answer-synthesis"), question=question, outcome=outcome)
    request = ChatRequest(system_prompt="You phrase answers.", messages=(("user", prompt),))
    return provider.complete(request).strip()


# ------------------------------------------------------------------- workflow


@dataclass
class QuestionOutcome:
    question: str
    query: str
    result: QueryResult
    answer: str
    correction_calls: int
    snippet: OntologySnippet = field(repr=False, default=None)


def answer_question(
    question: str,
    kb: Graph,
    provider: Provider,
    linked: Sequence[LinkCandidate] = (),
    p: float = DEFAULT_FP_RATE,
    budget: int = DEFAULT_BUDGET,
) -> QuestionOutcome:
    """The full pipeline: filter, prune, generate, run (with corrections),
    phrase the answer."""
    bloom = build_filter(kb, p)
    snippet = prune_ontology(kb, bloom, linked, budget)
    query = generate_query(question, snippet, provider)
    context = AutocorrectContext(kb=kb, question=question, ontology=snippet.text)
    query, result, calls = autocorrect(query, None, context, provider)
    answer = synthesize_answer(question, result, provider)
    return QuestionOutcome(
        question=question,
        query=query,
        result=result,
        answer=answer,
        correction_calls=calls,
        snippet=snippet,
    )
