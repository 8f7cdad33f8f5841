"""Thread-safe wrapper around a Graph: shared readers, serialized writers.

Reads evaluate against a snapshot taken under the lock, so one
evaluation always sees a consistent state even while another thread
writes.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional

from sbtforge.rdf.evaluate import QueryResult, apply_update, evaluate
from sbtforge.rdf.sparql import QueryForm, parse_query
from sbtforge.rdf.terms import Graph


class TripleStore:
    def __init__(self, graph: Optional[Graph] = None):
        self._graph = graph if graph is not None else Graph()
        self._lock = threading.RLock()

    def snapshot(self) -> Graph:
        """Stable copy of the current state; safe to read without the lock."""
        with self._lock:
            return self._graph.copy()

    def query(self, q: QueryForm | str) -> QueryResult:
        form = parse_query(q) if isinstance(q, str) else q
        return evaluate(self.snapshot(), form)

    def update(self, q: QueryForm | str) -> QueryResult:
        form = parse_query(q) if isinstance(q, str) else q
        with self._lock:
            return apply_update(self._graph, form)

    def mutate(self, fn: Callable[[Graph], None]) -> None:
        """Run an arbitrary write under the writer lock."""
        with self._lock:
            fn(self._graph)

    def replace(self, graph: Graph) -> None:
        with self._lock:
            self._graph = graph

    def __len__(self) -> int:
        with self._lock:
            return len(self._graph)
