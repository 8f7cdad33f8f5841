"""Turtle subset parser and deterministic serializer.

Supported syntax: ``@prefix``/``PREFIX`` directives, ``a``, predicate and
object lists (``;`` / ``,``), IRIs, prefixed names, blank nodes (labels
and ``[...]``), collections ``( ... )``, string literals with datatype or
language tag, and bare numeric / boolean tokens. Bare ``true``/``false``
parse as ``xsd:boolean``.

The serializer emits one sorted subject block per subject with prefixed
names where the namespace allows, so output is byte-stable for a given
graph.
"""

from __future__ import annotations

import re
from typing import Optional

from sbtforge.rdf.terms import (
    BUILTIN_PREFIXES,
    RDF_FIRST,
    RDF_NIL,
    RDF_REST,
    RDF_TYPE,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_DOUBLE,
    XSD_INTEGER,
    XSD_STRING,
    Graph,
    Term,
    Triple,
    blank,
    iri,
    literal,
)


class TurtleParseError(ValueError):
    """Syntax or prefix error, annotated with line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}

_PNAME_LOCAL_OK = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*\Z")
_INTEGER_RE = re.compile(r"[+-]?[0-9]+\Z")
_DECIMAL_RE = re.compile(r"[+-]?[0-9]*\.[0-9]+\Z")
_DOUBLE_RE = re.compile(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)[eE][+-]?[0-9]+\Z")


class _Scanner:
    """Character scanner with line/column tracking shared by the parser."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def line_col(self, pos: Optional[int] = None) -> tuple[int, int]:
        p = self.pos if pos is None else pos
        line = self.text.count("\n", 0, p) + 1
        last_nl = self.text.rfind("\n", 0, p)
        return line, p - last_nl

    def error(self, message: str, pos: Optional[int] = None) -> TurtleParseError:
        line, col = self.line_col(pos)
        return TurtleParseError(message, line, col)

    def skip_ws(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self.pos += 1
            elif ch == "#":
                nl = self.text.find("\n", self.pos)
                self.pos = len(self.text) if nl < 0 else nl + 1
            else:
                break

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, token: str) -> None:
        self.skip_ws()
        if not self.text.startswith(token, self.pos):
            raise self.error(f"expected {token!r}")
        self.pos += len(token)

    def try_token(self, token: str) -> bool:
        self.skip_ws()
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def read_iriref(self) -> str:
        # caller already saw '<'
        start = self.pos
        self.pos += 1
        end = self.text.find(">", self.pos)
        if end < 0:
            raise self.error("unterminated IRI", start)
        value = self.text[self.pos : end]
        if any(c in value for c in " \t\n\r"):
            raise self.error("whitespace inside IRI", start)
        self.pos = end + 1
        return value

    def read_string(self) -> str:
        quote = self.text[self.pos]
        start = self.pos
        self.pos += 1
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated string", start)
            ch = self.text[self.pos]
            if ch == quote:
                self.pos += 1
                return "".join(out)
            if ch == "\n":
                raise self.error("newline in single-quoted string", start)
            if ch == "\\":
                esc = self.text[self.pos + 1 : self.pos + 2]
                if esc in _ESCAPES:
                    out.append(_ESCAPES[esc])
                    self.pos += 2
                elif esc == "u":
                    out.append(chr(int(self.text[self.pos + 2 : self.pos + 6], 16)))
                    self.pos += 6
                elif esc == "U":
                    out.append(chr(int(self.text[self.pos + 2 : self.pos + 10], 16)))
                    self.pos += 10
                else:
                    raise self.error(f"bad escape \\{esc}")
            else:
                out.append(ch)
                self.pos += 1

    def read_bare_token(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in " \t\r\n;,()[]<>\"'#":
            self.pos += 1
        token = self.text[start : self.pos]
        # a trailing '.' terminates the statement, not the token
        while token.endswith(".") and not _DECIMAL_RE.match(token) and not _DOUBLE_RE.match(token):
            token = token[:-1]
            self.pos -= 1
        if not token:
            raise self.error("expected a term", start)
        return token


class _TurtleParser:
    def __init__(self, text: str):
        self.sc = _Scanner(text)
        self.graph = Graph()
        self._auto = 0
        self._used_labels: set[str] = set()

    def parse(self) -> Graph:
        while not self.sc.at_end():
            if self.sc.try_token("@prefix"):
                self._directive(sparql_style=False)
            elif self.sc.try_token("PREFIX"):
                self._directive(sparql_style=True)
            elif self.sc.try_token("@base") or self.sc.try_token("BASE"):
                raise self.sc.error("base directives are not supported")
            else:
                subject = self._subject()
                self._predicate_object_list(subject)
                self.sc.expect(".")
        return self.graph

    def _peek_keyword(self, kw: str) -> bool:
        self.sc.skip_ws()
        if not self.sc.text.startswith(kw, self.sc.pos):
            return False
        after = self.sc.pos + len(kw)
        if after >= len(self.sc.text):
            return True
        return self.sc.text[after] not in (
            "_-:" + "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
        )

    def _directive(self, sparql_style: bool) -> None:
        self.sc.skip_ws()
        colon = self.sc.text.find(":", self.sc.pos)
        if colon < 0:
            raise self.sc.error("expected prefix name")
        prefix = self.sc.text[self.sc.pos : colon].strip()
        self.sc.pos = colon + 1
        self.sc.skip_ws()
        if self.sc.peek() != "<":
            raise self.sc.error("expected IRI in prefix directive")
        ns = self.sc.read_iriref()
        self.graph.bind(prefix, ns)
        if not sparql_style:
            self.sc.expect(".")

    def _fresh_blank(self) -> Term:
        while True:
            self._auto += 1
            label = f"gen{self._auto}"
            if label not in self._used_labels:
                self._used_labels.add(label)
                return blank(label)

    def _subject(self) -> Term:
        term = self._term(allow_literal=False)
        return term

    def _predicate_object_list(self, subject: Term) -> None:
        while True:
            predicate = self._predicate()
            while True:
                obj = self._term(allow_literal=True)
                self.graph.add_triple(Triple(subject, predicate, obj))
                if not self.sc.try_token(","):
                    break
            if not self.sc.try_token(";"):
                return
            # allow trailing ';' before '.' or ']'
            if self.sc.peek() in (".", "]", ""):
                return

    def _predicate(self) -> Term:
        self.sc.skip_ws()
        if self._peek_keyword("a"):
            self.sc.pos += 1
            return RDF_TYPE
        term = self._term(allow_literal=False, predicate_position=True)
        if not term.is_iri:
            raise self.sc.error("predicate must be an IRI")
        return term

    def _term(self, allow_literal: bool, predicate_position: bool = False) -> Term:
        ch = self.sc.peek()
        if ch == "":
            raise self.sc.error("unexpected end of input")
        if ch == "<":
            return iri(self.sc.read_iriref())
        if ch == "[":
            if predicate_position:
                raise self.sc.error("blank node cannot be a predicate")
            self.sc.expect("[")
            node = self._fresh_blank()
            if self.sc.peek() != "]":
                self._predicate_object_list(node)
            self.sc.expect("]")
            return node
        if ch == "(":
            if predicate_position:
                raise self.sc.error("collection cannot be a predicate")
            return self._collection()
        if ch in "\"'":
            if not allow_literal:
                raise self.sc.error("literal not allowed here")
            return self._literal_tail(self.sc.read_string())
        token = self.sc.read_bare_token()
        return self._term_from_token(token, allow_literal)

    def _collection(self) -> Term:
        self.sc.expect("(")
        items: list[Term] = []
        while self.sc.peek() != ")":
            items.append(self._term(allow_literal=True))
        self.sc.expect(")")
        if not items:
            return RDF_NIL
        head = self._fresh_blank()
        node = head
        for i, item in enumerate(items):
            self.graph.add_triple(Triple(node, RDF_FIRST, item))
            rest = self._fresh_blank() if i + 1 < len(items) else RDF_NIL
            self.graph.add_triple(Triple(node, RDF_REST, rest))
            node = rest
        return head

    def _literal_tail(self, value: str) -> Term:
        if self.sc.text.startswith("^^", self.sc.pos):
            self.sc.pos += 2
            if self.sc.peek() == "<":
                dt = self.sc.read_iriref()
            else:
                dt_term = self._term_from_token(self.sc.read_bare_token(), allow_literal=False)
                dt = dt_term.value
            return literal(value, dt)
        if self.sc.text.startswith("@", self.sc.pos):
            self.sc.pos += 1
            m = re.match(r"[A-Za-z]+(-[A-Za-z0-9]+)*", self.sc.text[self.sc.pos :])
            if not m:
                raise self.sc.error("malformed language tag")
            self.sc.pos += m.end()
            return literal(value, lang=m.group(0))
        return literal(value)

    def _term_from_token(self, token: str, allow_literal: bool) -> Term:
        if token.startswith("_:"):
            label = token[2:]
            self._used_labels.add(label)
            return blank(label)
        if allow_literal:
            if token in ("true", "false"):
                return literal(token, XSD_BOOLEAN)
            if _INTEGER_RE.match(token):
                return literal(token, XSD_INTEGER)
            if _DECIMAL_RE.match(token):
                return literal(token, XSD_DECIMAL)
            if _DOUBLE_RE.match(token):
                return literal(token, XSD_DOUBLE)
        if ":" not in token:
            raise self.sc.error(f"cannot interpret token {token!r}")
        prefix, _, local = token.partition(":")
        namespaces = {**BUILTIN_PREFIXES, **self.graph.prefixes}
        if prefix not in namespaces:
            raise self.sc.error(f"undefined prefix {prefix!r}")
        return iri(namespaces[prefix] + local)


def parse_turtle(text: str) -> Graph:
    """Parse a Turtle document into a fresh Graph. Pure: no shared state."""
    return _TurtleParser(text).parse()


def _escape(value: str) -> str:
    out = value.replace("\\", "\\\\").replace('"', '\\"')
    return out.replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t")


def _shrink_iri(value: str, prefixes: dict[str, str]) -> Optional[str]:
    best: Optional[tuple[str, str]] = None
    for prefix, ns in prefixes.items():
        if value.startswith(ns):
            local = value[len(ns) :]
            if local == "" or _PNAME_LOCAL_OK.match(local):
                if best is None or len(ns) > len(prefixes[best[0]]):
                    best = (prefix, local)
    if best is None:
        return None
    return f"{best[0]}:{best[1]}"


def format_term(term: Term, prefixes: Optional[dict[str, str]] = None) -> str:
    """Render one term in Turtle syntax, shrinking IRIs through the prefix map."""
    prefixes = {**BUILTIN_PREFIXES, **(prefixes or {})}
    if term.is_iri:
        short = _shrink_iri(term.value, prefixes)
        return short if short is not None else f"<{term.value}>"
    if term.is_blank:
        return f"_:{term.value}"
    if term.language_tag:
        return f'"{_escape(term.value)}"@{term.language_tag}'
    dt = term.datatype_iri or XSD_STRING
    if dt == XSD_BOOLEAN and term.value in ("true", "false"):
        return term.value
    if dt == XSD_INTEGER and _INTEGER_RE.match(term.value):
        return term.value
    if dt == XSD_DECIMAL and _DECIMAL_RE.match(term.value):
        return term.value
    if dt == XSD_STRING:
        return f'"{_escape(term.value)}"'
    short = _shrink_iri(dt, prefixes)
    dt_out = short if short is not None else f"<{dt}>"
    return f'"{_escape(term.value)}"^^{dt_out}'


def serialize_turtle(graph: Graph) -> str:
    """Deterministic Turtle serialization: sorted prefixes, sorted subject blocks."""
    lines: list[str] = []
    for prefix in sorted(graph.prefixes):
        lines.append(f"@prefix {prefix}: <{graph.prefixes[prefix]}> .")
    if graph.prefixes:
        lines.append("")
    by_subject: dict[Term, list[Triple]] = {}
    for t in graph.triples:
        by_subject.setdefault(t.subject, []).append(t)
    for subject in sorted(by_subject, key=Term.sort_key):
        triples = sorted(by_subject[subject], key=Triple.sort_key)
        subj_out = format_term(subject, graph.prefixes)
        parts: list[str] = []
        by_pred: dict[Term, list[Term]] = {}
        for t in triples:
            by_pred.setdefault(t.predicate, []).append(t.object)
        for pred in sorted(by_pred, key=Term.sort_key):
            pred_out = "a" if pred == RDF_TYPE else format_term(pred, graph.prefixes)
            objs = ", ".join(format_term(o, graph.prefixes) for o in sorted(by_pred[pred], key=Term.sort_key))
            parts.append(f"{pred_out} {objs}")
        joined = " ;\n    ".join(parts)
        lines.append(f"{subj_out} {joined} .")
    return "\n".join(lines) + ("\n" if lines else "")
