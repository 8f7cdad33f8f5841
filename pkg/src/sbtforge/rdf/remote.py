"""Client for W3C SPARQL 1.1 protocol endpoints.

Queries go out via GET ``?query=`` (or POST form when the text is long),
results come back as the standard JSON results document, or Turtle for
CONSTRUCT. Error responses keep the raw body: the autocorrection loop
feeds it back to the language model verbatim.
"""

from __future__ import annotations

import requests

from sbtforge.rdf.evaluate import QueryResult
from sbtforge.rdf.results import json_to_result
from sbtforge.rdf.turtle import parse_turtle

_GET_LIMIT = 2000  # switch to POST form beyond this query length


class RemoteQueryError(RuntimeError):
    """Transport or HTTP failure; `body` carries the server's exact text."""

    def __init__(self, message: str, status: int | None = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


def remote_query(endpoint: str, query_text: str, timeout: float = 10.0) -> QueryResult:
    headers = {"Accept": "application/sparql-results+json, text/turtle"}
    try:
        if len(query_text) <= _GET_LIMIT:
            resp = requests.get(
                endpoint, params={"query": query_text}, headers=headers, timeout=timeout
            )
        else:
            resp = requests.post(
                endpoint, data={"query": query_text}, headers=headers, timeout=timeout
            )
    except requests.RequestException as exc:
        raise RemoteQueryError(f"transport failure querying {endpoint}: {exc}") from exc
    if resp.status_code // 100 != 2:
        raise RemoteQueryError(
            f"endpoint returned HTTP {resp.status_code}",
            status=resp.status_code,
            body=resp.text,
        )
    content_type = resp.headers.get("Content-Type", "").split(";")[0].strip()
    if content_type in ("application/sparql-results+json", "application/json"):
        try:
            return json_to_result(resp.json())
        except (ValueError, KeyError) as exc:
            raise RemoteQueryError(
                f"malformed results document: {exc}", status=resp.status_code, body=resp.text
            ) from exc
    if content_type in ("text/turtle", "application/turtle"):
        return QueryResult(kind="construct", graph=parse_turtle(resp.text))
    raise RemoteQueryError(
        f"unexpected content type {content_type!r}", status=resp.status_code, body=resp.text
    )


class RemoteEndpoint:
    """Read-only handle on a remote SPARQL endpoint."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def query(self, query_text: str) -> QueryResult:
        return remote_query(self.url, query_text, timeout=self.timeout)

    def update(self, query_text: str) -> QueryResult:
        raise RemoteQueryError("update on a read-only remote handle")
