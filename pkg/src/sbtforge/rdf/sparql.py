"""Parser for the SPARQL subset the engine evaluates.

Covered: ASK, SELECT (optionally DISTINCT), CONSTRUCT, INSERT DATA, and
DELETE/INSERT ... WHERE, over basic graph patterns with FILTER
comparison expressions (=, !=, <, >, &&, ||, !) and FILTER NOT EXISTS.
Anything else raises :class:`UnsupportedSparqlError` naming the
construct, so callers can surface a precise diagnostic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

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
    Graph,
    Term,
    Triple,
    Variable,
    blank,
    iri,
    literal,
)
from sbtforge.rdf.turtle import format_term

PatternTerm = Union[Term, Variable]


class SparqlParseError(ValueError):
    """Syntax error with the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnsupportedSparqlError(ValueError):
    """Feature outside the supported subset; carries the construct name."""

    def __init__(self, construct: str):
        super().__init__(f"unsupported SPARQL feature: {construct}")
        self.construct = construct


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def variables(self) -> set[str]:
        return {t.name for t in (self.subject, self.predicate, self.object) if isinstance(t, Variable)}


@dataclass(frozen=True)
class Comparison:
    op: str  # = != < >
    left: PatternTerm
    right: PatternTerm


@dataclass(frozen=True)
class BoolExpr:
    op: str  # && || !
    parts: tuple


FilterExpr = Union[Comparison, BoolExpr]


@dataclass(frozen=True)
class NotExists:
    patterns: tuple[TriplePattern, ...]
    filters: tuple = ()


@dataclass
class QueryForm:
    """Structured form of one parsed query or update."""

    kind: str  # ask | select | construct | updateInsertData | updateDeleteInsertWhere
    patterns: list[TriplePattern] = field(default_factory=list)
    filters: list[Union[FilterExpr, NotExists]] = field(default_factory=list)
    template: list[TriplePattern] = field(default_factory=list)
    delete_template: list[TriplePattern] = field(default_factory=list)
    projected: list[str] = field(default_factory=list)
    distinct: bool = False
    prefixes: dict[str, str] = field(default_factory=dict)
    source: str = ""

    @property
    def is_update(self) -> bool:
        return self.kind.startswith("update")

    def pattern_variables(self) -> set[str]:
        out: set[str] = set()
        for p in self.patterns:
            out |= p.variables()
        return out


_KEYWORD_RE = re.compile(r"[A-Za-z]+")

_UNSUPPORTED_KEYWORDS = {
    "OPTIONAL", "UNION", "GRAPH", "SERVICE", "MINUS", "BIND", "VALUES",
    "GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET", "DESCRIBE", "WITH",
    "LOAD", "CLEAR", "DROP", "CREATE", "COPY", "MOVE", "ADD", "REDUCED",
}


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> SparqlParseError:
        return SparqlParseError(message, self.pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self.pos += 1
            elif ch == "#":
                nl = self.text.find("\n", self.pos)
                self.pos = len(self.text) if nl < 0 else nl + 1
            else:
                return

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def try_punct(self, token: str) -> bool:
        self.skip_ws()
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def expect_punct(self, token: str) -> None:
        if not self.try_punct(token):
            raise self.error(f"expected {token!r}")

    def peek_keyword(self) -> str:
        self.skip_ws()
        m = _KEYWORD_RE.match(self.text, self.pos)
        return m.group(0).upper() if m else ""

    def take_keyword(self, *options: str) -> str:
        kw = self.peek_keyword()
        if kw in options:
            self.pos += len(kw)
            return kw
        raise self.error(f"expected one of {options}")

    def try_keyword(self, kw: str) -> bool:
        if self.peek_keyword() == kw:
            self.pos += len(kw)
            return True
        return False


class _SparqlParser:
    def __init__(self, text: str):
        self.lx = _Lexer(text)
        self.prefixes: dict[str, str] = dict(BUILTIN_PREFIXES)
        self.user_prefixes: dict[str, str] = {}
        self._auto_blank = 0

    # ------------------------------------------------------------- entry

    def parse(self) -> QueryForm:
        while self.lx.try_keyword("PREFIX"):
            self._prefix_decl()
        kw = self.lx.peek_keyword()
        if kw in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedSparqlError(kw)
        if kw == "ASK":
            self.lx.take_keyword("ASK")
            form = self._ask()
        elif kw == "SELECT":
            self.lx.take_keyword("SELECT")
            form = self._select()
        elif kw == "CONSTRUCT":
            self.lx.take_keyword("CONSTRUCT")
            form = self._construct()
        elif kw == "INSERT":
            self.lx.take_keyword("INSERT")
            form = self._insert()
        elif kw == "DELETE":
            self.lx.take_keyword("DELETE")
            form = self._delete_insert_where(delete_first=True)
        elif kw == "":
            raise self.lx.error("empty query")
        else:
            raise UnsupportedSparqlError(kw)
        if not self.lx.at_end():
            trailing = self.lx.peek_keyword()
            if trailing in _UNSUPPORTED_KEYWORDS:
                raise UnsupportedSparqlError(trailing)
            raise self.lx.error("trailing content after query")
        form.prefixes = dict(self.user_prefixes)
        return form

    def _prefix_decl(self) -> None:
        self.lx.skip_ws()
        colon = self.lx.text.find(":", self.lx.pos)
        if colon < 0:
            raise self.lx.error("expected prefix name")
        name = self.lx.text[self.lx.pos : colon].strip()
        self.lx.pos = colon + 1
        self.lx.skip_ws()
        if self.lx.peek() != "<":
            raise self.lx.error("expected namespace IRI")
        ns = self._read_iriref()
        self.prefixes[name] = ns
        self.user_prefixes[name] = ns

    # ------------------------------------------------------------- forms

    def _ask(self) -> QueryForm:
        patterns, filters = self._group_graph_pattern()
        return QueryForm(kind="ask", patterns=patterns, filters=filters)

    def _select(self) -> QueryForm:
        distinct = self.lx.try_keyword("DISTINCT")
        projected: list[str] = []
        star = False
        while True:
            ch = self.lx.peek()
            if ch == "*":
                self.lx.try_punct("*")
                star = True
            elif ch == "?" or ch == "$":
                projected.append(self._read_var().name)
            else:
                break
        self.lx.take_keyword("WHERE")
        patterns, filters = self._group_graph_pattern()
        form = QueryForm(
            kind="select", patterns=patterns, filters=filters,
            projected=projected, distinct=distinct,
        )
        if star:
            form.projected = sorted(form.pattern_variables())
        if not form.projected:
            raise self.lx.error("SELECT requires at least one projected variable")
        return form

    def _construct(self) -> QueryForm:
        template = self._triples_block(allow_blank=True)
        self.lx.take_keyword("WHERE")
        patterns, filters = self._group_graph_pattern()
        form = QueryForm(kind="construct", patterns=patterns, filters=filters, template=template)
        if not template:
            raise self.lx.error("CONSTRUCT requires a non-empty template")
        bound = form.pattern_variables()
        for p in template:
            loose = p.variables() - bound
            if loose:
                raise self.lx.error(
                    f"template variable ?{sorted(loose)[0]} does not appear in WHERE patterns"
                )
        return form

    def _insert(self) -> QueryForm:
        if self.lx.try_keyword("DATA"):
            template = self._triples_block(allow_blank=True)
            for p in template:
                if p.variables():
                    raise self.lx.error("INSERT DATA must be ground")
            return QueryForm(kind="updateInsertData", template=template)
        return self._delete_insert_where(delete_first=False)

    def _delete_insert_where(self, delete_first: bool) -> QueryForm:
        delete_template: list[TriplePattern] = []
        insert_template: list[TriplePattern] = []
        if delete_first:
            if self.lx.try_keyword("DATA"):
                raise UnsupportedSparqlError("DELETE DATA")
            if self.lx.try_keyword("WHERE"):
                raise UnsupportedSparqlError("DELETE WHERE shorthand")
            delete_template = self._triples_block(allow_blank=False)
            if self.lx.try_keyword("INSERT"):
                insert_template = self._triples_block(allow_blank=True)
        else:
            insert_template = self._triples_block(allow_blank=True)
            if self.lx.try_keyword("DELETE"):
                raise self.lx.error("DELETE clause must precede INSERT")
        self.lx.take_keyword("WHERE")
        patterns, filters = self._group_graph_pattern()
        form = QueryForm(
            kind="updateDeleteInsertWhere",
            patterns=patterns,
            filters=filters,
            template=insert_template,
            delete_template=delete_template,
        )
        bound = form.pattern_variables()
        for p in delete_template + insert_template:
            loose = p.variables() - bound
            if loose:
                raise self.lx.error(
                    f"template variable ?{sorted(loose)[0]} does not appear in WHERE patterns"
                )
        return form

    # ---------------------------------------------------------- patterns

    def _group_graph_pattern(self) -> tuple[list[TriplePattern], list]:
        self.lx.expect_punct("{")
        patterns: list[TriplePattern] = []
        filters: list = []
        while True:
            if self.lx.try_punct("}"):
                return patterns, filters
            kw = self.lx.peek_keyword()
            if kw == "FILTER":
                self.lx.take_keyword("FILTER")
                filters.append(self._filter())
            elif kw in _UNSUPPORTED_KEYWORDS:
                raise UnsupportedSparqlError(kw)
            elif self.lx.peek() == "{":
                raise UnsupportedSparqlError("nested group")
            else:
                patterns.extend(self._triples_same_subject(allow_blank=False))
                self.lx.try_punct(".")

    def _triples_block(self, allow_blank: bool) -> list[TriplePattern]:
        self.lx.expect_punct("{")
        out: list[TriplePattern] = []
        while not self.lx.try_punct("}"):
            out.extend(self._triples_same_subject(allow_blank=allow_blank))
            self.lx.try_punct(".")
        return out

    def _triples_same_subject(self, allow_blank: bool) -> list[TriplePattern]:
        out: list[TriplePattern] = []
        subject = self._pattern_term(allow_blank=allow_blank, allow_literal=False)
        while True:
            predicate = self._predicate_term()
            while True:
                obj = self._pattern_term(allow_blank=allow_blank, allow_literal=True)
                out.append(TriplePattern(subject, predicate, obj))
                if not self.lx.try_punct(","):
                    break
            if not self.lx.try_punct(";"):
                return out
            if self.lx.peek() in (".", "}", ""):
                return out

    def _predicate_term(self) -> PatternTerm:
        self.lx.skip_ws()
        if self.lx.text.startswith("a", self.lx.pos):
            after = self.lx.pos + 1
            if after >= len(self.lx.text) or self.lx.text[after] in " \t\r\n?<$_":
                self.lx.pos += 1
                return RDF_TYPE
        term = self._pattern_term(allow_blank=False, allow_literal=False)
        if isinstance(term, Term) and not term.is_iri:
            raise self.lx.error("predicate must be an IRI or variable")
        return term

    def _read_var(self) -> Variable:
        self.lx.skip_ws()
        ch = self.lx.text[self.lx.pos]
        assert ch in "?$"
        m = re.match(r"[?$]([A-Za-z_][A-Za-z0-9_]*)", self.lx.text[self.lx.pos :])
        if not m:
            raise self.lx.error("malformed variable")
        self.lx.pos += m.end()
        return Variable(m.group(1))

    def _read_iriref(self) -> str:
        start = self.lx.pos
        self.lx.pos += 1
        end = self.lx.text.find(">", self.lx.pos)
        if end < 0:
            raise SparqlParseError("unterminated IRI", start)
        value = self.lx.text[self.lx.pos : end]
        self.lx.pos = end + 1
        return value

    def _pattern_term(self, allow_blank: bool, allow_literal: bool) -> PatternTerm:
        ch = self.lx.peek()
        if ch == "":
            raise self.lx.error("unexpected end of query")
        if ch in ("?", "$"):
            return self._read_var()
        if ch == "<":
            return iri(self._read_iriref())
        if ch in "\"'":
            if not allow_literal:
                raise self.lx.error("literal not allowed here")
            return self._string_literal()
        if ch == "[":
            if not allow_blank:
                raise UnsupportedSparqlError("blank nodes in graph patterns")
            self.lx.expect_punct("[")
            self.lx.expect_punct("]")
            self._auto_blank += 1
            return blank(f"t{self._auto_blank}")
        if ch == "":
            raise self.lx.error("unexpected end of query")
        token = self._bare_token()
        if token.startswith("_:"):
            if not allow_blank:
                raise UnsupportedSparqlError("blank nodes in graph patterns")
            return blank(token[2:])
        if allow_literal:
            if token == "true" or token == "false":
                return literal(token, XSD_BOOLEAN)
            if re.fullmatch(r"[+-]?[0-9]+", token):
                return literal(token, XSD_INTEGER)
            if re.fullmatch(r"[+-]?[0-9]*\.[0-9]+", token):
                return literal(token, XSD_DECIMAL)
            if re.fullmatch(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)[eE][+-]?[0-9]+", token):
                return literal(token, XSD_DOUBLE)
        if ":" not in token:
            raise self.lx.error(f"cannot interpret token {token!r}")
        prefix, _, local = token.partition(":")
        if prefix not in self.prefixes:
            raise self.lx.error(f"undefined prefix {prefix!r}")
        return iri(self.prefixes[prefix] + local)

    def _string_literal(self) -> Term:
        quote = self.lx.text[self.lx.pos]
        start = self.lx.pos
        self.lx.pos += 1
        out: list[str] = []
        while True:
            if self.lx.pos >= len(self.lx.text):
                raise SparqlParseError("unterminated string", start)
            ch = self.lx.text[self.lx.pos]
            if ch == quote:
                self.lx.pos += 1
                break
            if ch == "\\":
                nxt = self.lx.text[self.lx.pos + 1 : self.lx.pos + 2]
                mapping = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "'": "'", "\\": "\\"}
                if nxt not in mapping:
                    raise self.lx.error(f"bad escape \\{nxt}")
                out.append(mapping[nxt])
                self.lx.pos += 2
            else:
                out.append(ch)
                self.lx.pos += 1
        value = "".join(out)
        if self.lx.text.startswith("^^", self.lx.pos):
            self.lx.pos += 2
            if self.lx.peek() == "<":
                return literal(value, self._read_iriref())
            token = self._bare_token()
            prefix, _, local = token.partition(":")
            if prefix not in self.prefixes:
                raise self.lx.error(f"undefined prefix {prefix!r}")
            return literal(value, self.prefixes[prefix] + local)
        if self.lx.text.startswith("@", self.lx.pos):
            self.lx.pos += 1
            m = re.match(r"[A-Za-z]+(-[A-Za-z0-9]+)*", self.lx.text[self.lx.pos :])
            if not m:
                raise self.lx.error("malformed language tag")
            self.lx.pos += m.end()
            return literal(value, lang=m.group(0))
        return literal(value)

    def _bare_token(self) -> str:
        self.lx.skip_ws()
        start = self.lx.pos
        while self.lx.pos < len(self.lx.text) and self.lx.text[self.lx.pos] not in " \t\r\n;,(){}<>\"'#":
            self.lx.pos += 1
        token = self.lx.text[start : self.lx.pos]
        while token.endswith(".") and not re.fullmatch(r"[+-]?[0-9]*\.[0-9]+", token):
            token = token[:-1]
            self.lx.pos -= 1
        if not token:
            raise self.lx.error("expected a term")
        return token

    # ----------------------------------------------------------- filters

    def _filter(self):
        if self.lx.try_keyword("NOT"):
            self.lx.take_keyword("EXISTS")
            patterns, filters = self._group_graph_pattern()
            return NotExists(tuple(patterns), tuple(filters))
        if self.lx.try_keyword("EXISTS"):
            raise UnsupportedSparqlError("FILTER EXISTS")
        self.lx.expect_punct("(")
        expr = self._or_expr()
        self.lx.expect_punct(")")
        return expr

    def _or_expr(self):
        parts = [self._and_expr()]
        while self.lx.try_punct("||"):
            parts.append(self._and_expr())
        if len(parts) == 1:
            return parts[0]
        return BoolExpr("||", tuple(parts))

    def _and_expr(self):
        parts = [self._unary_expr()]
        while self.lx.try_punct("&&"):
            parts.append(self._unary_expr())
        if len(parts) == 1:
            return parts[0]
        return BoolExpr("&&", tuple(parts))

    def _unary_expr(self):
        if self.lx.peek() == "!" and not self.lx.text.startswith("!=", self.lx.pos):
            self.lx.expect_punct("!")
            return BoolExpr("!", (self._unary_expr(),))
        if self.lx.try_punct("("):
            expr = self._or_expr()
            self.lx.expect_punct(")")
            return expr
        return self._comparison()

    def _comparison(self):
        left = self._operand()
        self.lx.skip_ws()
        for op in ("!=", "<=", ">=", "=", "<", ">"):
            if self.lx.text.startswith(op, self.lx.pos):
                if op in ("<=", ">="):
                    raise UnsupportedSparqlError(f"operator {op}")
                self.lx.pos += len(op)
                right = self._operand()
                return Comparison(op, left, right)
        raise self.lx.error("expected comparison operator")

    def _operand(self) -> PatternTerm:
        ch = self.lx.peek()
        if ch == "":
            raise self.lx.error("unexpected end of filter expression")
        if ch in ("?", "$"):
            return self._read_var()
        if ch == "<":
            # digits or whitespace right after '<' mean the comparison operator
            nxt = self.lx.text[self.lx.pos + 1 : self.lx.pos + 2]
            if nxt and nxt not in " \t\r\n=":
                return iri(self._read_iriref())
            raise self.lx.error("expected operand")
        if ch in "\"'":
            return self._string_literal()
        token = self._bare_token()
        if token in ("true", "false"):
            return literal(token, XSD_BOOLEAN)
        if re.fullmatch(r"[+-]?[0-9]+", token):
            return literal(token, XSD_INTEGER)
        if re.fullmatch(r"[+-]?[0-9]*\.[0-9]+", token):
            return literal(token, XSD_DECIMAL)
        if ":" in token:
            prefix, _, local = token.partition(":")
            if prefix not in self.prefixes:
                raise self.lx.error(f"undefined prefix {prefix!r}")
            return iri(self.prefixes[prefix] + local)
        raise self.lx.error(f"cannot interpret operand {token!r}")


def parse_query(text: str) -> QueryForm:
    """Parse one query or update in the supported subset. Pure."""
    form = _SparqlParser(text).parse()
    form.source = text
    return form


def bind_query(form: QueryForm, bindings: dict[str, Term]) -> QueryForm:
    """A copy of `form` with the given variables replaced by concrete terms."""

    def sub(t: PatternTerm) -> PatternTerm:
        if isinstance(t, Variable) and t.name in bindings:
            return bindings[t.name]
        return t

    def sub_pattern(p: TriplePattern) -> TriplePattern:
        return TriplePattern(sub(p.subject), sub(p.predicate), sub(p.object))

    def sub_filter(f):
        if isinstance(f, Comparison):
            return Comparison(f.op, sub(f.left), sub(f.right))
        if isinstance(f, BoolExpr):
            return BoolExpr(f.op, tuple(sub_filter(p) for p in f.parts))
        if isinstance(f, NotExists):
            return NotExists(
                tuple(sub_pattern(p) for p in f.patterns),
                tuple(sub_filter(x) for x in f.filters),
            )
        return f

    return QueryForm(
        kind=form.kind,
        patterns=[sub_pattern(p) for p in form.patterns],
        filters=[sub_filter(f) for f in form.filters],
        template=[sub_pattern(p) for p in form.template],
        delete_template=[sub_pattern(p) for p in form.delete_template],
        projected=[v for v in form.projected if v not in bindings],
        distinct=form.distinct,
        prefixes=dict(form.prefixes),
        source="",  # original text no longer matches; format_query regenerates
    )


def format_pattern_term(t: PatternTerm, prefixes: Optional[dict[str, str]] = None) -> str:
    if isinstance(t, Variable):
        return f"?{t.name}"
    return format_term(t, prefixes)


def _format_expr(f) -> str:
    if isinstance(f, Comparison):
        return f"{format_pattern_term(f.left)} {f.op} {format_pattern_term(f.right)}"
    if isinstance(f, BoolExpr):
        if f.op == "!":
            return f"!({_format_expr(f.parts[0])})"
        return f" {f.op} ".join(f"({_format_expr(p)})" for p in f.parts)
    raise ValueError(f"cannot format filter node {f!r}")


def _format_group(patterns, filters) -> str:
    lines = [
        f"  {format_pattern_term(p.subject)} {format_pattern_term(p.predicate)} "
        f"{format_pattern_term(p.object)} ."
        for p in patterns
    ]
    for f in filters:
        if isinstance(f, NotExists):
            inner = _format_group(list(f.patterns), list(f.filters))
            lines.append("  FILTER NOT EXISTS " + inner.replace("\n", "\n  "))
        else:
            lines.append(f"  FILTER({_format_expr(f)})")
    return "{\n" + "\n".join(lines) + "\n}"


def _format_template(patterns) -> str:
    lines = [
        f"  {format_pattern_term(p.subject)} {format_pattern_term(p.predicate)} "
        f"{format_pattern_term(p.object)} ."
        for p in patterns
    ]
    return "{\n" + "\n".join(lines) + "\n}"


def format_query(form: QueryForm) -> str:
    """Serialize a QueryForm back to query text (full IRIs, no prefixes).

    parse_query(format_query(f)) reproduces f structurally; the original
    source text is not consulted, so bound queries format correctly.
    """
    group = _format_group(form.patterns, form.filters)
    if form.kind == "ask":
        return f"ASK {group}"
    if form.kind == "select":
        head = "SELECT DISTINCT" if form.distinct else "SELECT"
        vars_ = " ".join(f"?{v}" for v in form.projected)
        return f"{head} {vars_} WHERE {group}"
    if form.kind == "construct":
        return f"CONSTRUCT {_format_template(form.template)} WHERE {group}"
    if form.kind == "updateInsertData":
        return f"INSERT DATA {_format_template(form.template)}"
    if form.kind == "updateDeleteInsertWhere":
        parts = []
        if form.delete_template:
            parts.append(f"DELETE {_format_template(form.delete_template)}")
        if form.template:
            parts.append(f"INSERT {_format_template(form.template)}")
        parts.append(f"WHERE {group}")
        return " ".join(parts)
    raise ValueError(f"cannot format query kind {form.kind}")
