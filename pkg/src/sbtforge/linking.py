"""Surface-form understanding: tokenization, fuzzy linking of words to
labeled RDF resources, confidence scoring, disambiguation, and the
per-user synonym dictionary that makes choices stick.
"""

from __future__ import annotations

import json
import re
import threading
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence

from sbtforge.rdf.terms import RDF_TYPE, RDFS_LABEL, Graph, Term, iri

GOAL_CLASS = iri("http://sbtforge.org/vocab/agent#Goal")
ACTION_CLASS = iri("http://sbtforge.org/vocab/agent#Action")

CONFIDENCE_THRESHOLD = 0.5
TIE_WINDOW = 0.05
CONFIDENCE_FLOOR = 0.2

_TOKEN = re.compile(r"[A-Za-z0-9_]+|[?!.,;:]")


class UnresolvedTermError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    surface: str
    lower: str
    position: int  # offset into the original string


def tokenize(text: str) -> list[Token]:
    """Words and sentence punctuation, positions indexing the original
    string. Hyphens split words and produce no token of their own."""
    return [Token(surface=m.group(0), lower=m.group(0).lower(), position=m.start()) for m in _TOKEN.finditer(text)]


def levenshtein(a: str, b: str) -> tuple[int, float]:
    """Edit distance on case-folded strings (insertions, deletions,
    substitutions, adjacent transpositions) plus the normalized
    confidence 1 - d / max(|a|, |b|); exact matches score 1.0."""
    a, b = a.casefold(), b.casefold()
    if not a and not b:
        return 0, 1.0
    prev2: Optional[list[int]] = None
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        row = [i]
        for j, cb in enumerate(b, start=1):
            best = min(prev[j] + 1, row[j - 1] + 1, prev[j - 1] + (ca != cb))
            if i > 1 and j > 1 and ca == b[j - 2] and a[i - 2] == cb:
                best = min(best, prev2[j - 2] + 1)
            row.append(best)
        prev2, prev = prev, row
    distance = prev[-1]
    return distance, 1.0 - distance / max(len(a), len(b))


@dataclass(frozen=True)
class LinkCandidate:
    surface_form: str
    uri: Term
    label: str
    confidence: float


@dataclass(frozen=True)
class IndexEntry:
    label: str
    uri: Term
    kind: str  # entity | relation | goal


def _trigrams(text: str) -> set[str]:
    folded = text.casefold()
    return {folded[i : i + 3] for i in range(len(folded) - 2)}


class FuzzyIndex:
    """Immutable after build: label entries plus character-trigram
    posting lists for cheap candidate prefiltering.

    The prefilter must never lose a match whose confidence would reach
    the 0.5 disambiguation threshold, and trigram overlap alone cannot
    promise that (at distance max(|a|,|b|)/2 two strings can share no
    trigram at all). So entries missed by the posting lists get a bag
    -distance check: the multiset character difference never exceeds the
    edit distance, which makes the filter lossless above the threshold.
    """

    def __init__(self, entries: Sequence[IndexEntry]):
        self.entries = list(entries)
        self._postings: dict[str, set[int]] = {}
        self._bags: list[Counter] = []
        for idx, entry in enumerate(self.entries):
            for gram in _trigrams(entry.label):
                self._postings.setdefault(gram, set()).add(idx)
            self._bags.append(Counter(entry.label.casefold()))

    def __len__(self) -> int:
        return len(self.entries)

    def labels(self) -> set[str]:
        return {e.label for e in self.entries}

    def _candidate_indices(self, surface: str, prefilter: bool) -> set[int]:
        if not prefilter:
            return set(range(len(self.entries)))
        hits: set[int] = set()
        for gram in _trigrams(surface):
            hits |= self._postings.get(gram, set())
        folded = surface.casefold()
        bag = Counter(folded)
        for idx, entry in enumerate(self.entries):
            if idx in hits:
                continue
            label = entry.label.casefold()
            budget = max(len(folded), len(label)) // 2  # d <= budget <=> conf >= 0.5
            distance_floor = max(
                sum((bag - self._bags[idx]).values()), sum((self._bags[idx] - bag).values())
            )
            if distance_floor <= budget:
                hits.add(idx)
        return hits

    def search(
        self, surface: str, kind: Optional[str] = None, prefilter: bool = True
    ) -> list[LinkCandidate]:
        out = []
        for idx in self._candidate_indices(surface, prefilter):
            entry = self.entries[idx]
            if kind is not None and entry.kind != kind:
                continue
            _d, confidence = levenshtein(surface, entry.label)
            if confidence >= CONFIDENCE_FLOOR:
                out.append(
                    LinkCandidate(
                        surface_form=surface, uri=entry.uri, label=entry.label, confidence=confidence
                    )
                )
        out.sort(key=lambda c: (-c.confidence, c.uri.value))
        return out


def build_index(kb: Graph) -> FuzzyIndex:
    """Index every rdfs:label in the graph. URIs that appear in predicate
    position are relations; declared goals and actions both index as
    kind=goal (they name achievable behavior); the rest are entities."""
    predicates = {t.predicate for t in kb.triples}
    goal_like = set(kb.subjects(RDF_TYPE, GOAL_CLASS)) | set(kb.subjects(RDF_TYPE, ACTION_CLASS))
    seen: set[tuple[str, Term]] = set()
    entries = []
    for triple in sorted(kb.match(None, RDFS_LABEL, None), key=lambda t: t.sort_key()):
        if not triple.object.is_literal:
            continue
        label = triple.object.value
        key = (label, triple.subject)
        if key in seen:
            continue
        seen.add(key)
        if triple.subject in goal_like:
            kind = "goal"
        elif triple.subject in predicates:
            kind = "relation"
        else:
            kind = "entity"
        entries.append(IndexEntry(label=label, uri=triple.subject, kind=kind))
    return FuzzyIndex(entries)


class SynonymDictionary:
    """Case-insensitive surface → URI map, one JSON file per user when a
    directory is given. Re-learning a surface overwrites the old entry."""

    VERSION = 1

    def __init__(self, user_id: str, directory=None):
        self.user_id = user_id
        self.directory = Path(directory) if directory is not None else None
        self.entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.directory is not None and self.path.exists():
            self._load()

    @property
    def path(self) -> Path:
        return self.directory / f"{self.user_id}.json"

    def _load(self) -> None:
        doc = json.loads(self.path.read_text(encoding="utf-8"))
        if doc.get("v") != self.VERSION:
            raise ValueError(f"{self.path}: unsupported dictionary version {doc.get('v')!r}")
        self.entries = dict(doc.get("entries", {}))

    def save(self) -> None:
        if self.directory is None:
            return
        self.directory.mkdir(parents=True, exist_ok=True)
        doc = {"v": self.VERSION, "user": self.user_id, "entries": self.entries}
        self.path.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")

    def lookup(self, surface: str) -> Optional[Term]:
        entry = self.entries.get(surface.casefold())
        return iri(entry["uri"]) if entry else None

    def learn(self, surface: str, uri: Term, source: str = "disambiguation") -> None:
        with self._lock:
            self.entries[surface.casefold()] = {
                "uri": uri.value,
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "source": source,
            }
            self.save()


def link(
    surfaces: Sequence[str],
    index: FuzzyIndex,
    dictionary: Optional[SynonymDictionary] = None,
    kind: Optional[str] = None,
) -> dict[str, list[LinkCandidate]]:
    """Dictionary hits short-circuit with confidence 1.0; everything else
    goes through the fuzzy index."""
    out: dict[str, list[LinkCandidate]] = {}
    for surface in surfaces:
        hit = dictionary.lookup(surface) if dictionary is not None else None
        if hit is not None:
            label = next((e.label for e in index.entries if e.uri == hit), surface)
            out[surface] = [LinkCandidate(surface_form=surface, uri=hit, label=label, confidence=1.0)]
            continue
        out[surface] = index.search(surface, kind=kind)
    return out


def needs_disambiguation(
    candidates: Sequence[LinkCandidate],
    threshold: float = CONFIDENCE_THRESHOLD,
    tie_window: float = TIE_WINDOW,
) -> bool:
    if not candidates:
        return True
    if candidates[0].confidence < threshold:
        return True
    if len(candidates) > 1 and candidates[0].confidence - candidates[1].confidence <= tie_window:
        return True
    return False


def disambiguate(
    surface: str,
    candidates: Sequence[LinkCandidate],
    ask: Callable[[str, Sequence[LinkCandidate]], Optional[int]],
    dictionary: SynonymDictionary,
) -> Term:
    """Put the ranked options to the user; the accepted choice is learned
    so the next occurrence of the surface resolves silently."""
    if not candidates:
        raise UnresolvedTermError(f"no candidates for {surface!r}")
    choice = ask(surface, list(candidates))
    if choice is None:
        raise UnresolvedTermError(f"user declined to resolve {surface!r}")
    if not 0 <= choice < len(candidates):
        raise UnresolvedTermError(f"choice {choice} out of range for {surface!r}")
    selected = candidates[choice]
    dictionary.learn(surface, selected.uri, source="disambiguation")
    return selected.uri
