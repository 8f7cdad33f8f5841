"""Documentation search: chunking, embedding, an exact-cosine vector
index with provenance metadata, and grounded answers with citations.

Search is deliberately exact rather than approximate — the corpus is a
wiki, not the web — which keeps retrieval oracle-testable: the reported
ranking must equal brute-force cosine over every entry.
"""

from __future__ import annotations

import json
import logging
import os
import re
import struct
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path
from typing import Optional, Sequence

import requests

from sbtforge.llm import ChatRequest, EmbeddingVector, Provider, cosine
from sbtforge.queries import fill_prompt, prompt_template

log = logging.getLogger("sbtforge.search")

MAX_CHUNK = 1500
DEFAULT_K = 5
NO_DOCS_ANSWER = "No documentation found for that question."

INDEX_MAGIC = b"SBTV"
INDEX_VERSION = 1

_HEADING = re.compile(r"^(#{1,6})\s+(.*?)\s*#*\s*$")
_SENTENCE_END = re.compile(r"[.!?]+(?:\s+|$)")


class SearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class Chunk:
    document_uri: str
    section_title: str
    offset: int  # character index into the source document
    text: str

    @property
    def chunk_id(self) -> str:
        return f"{self.document_uri}#{self.offset}"


# -------------------------------------------------------------------- chunking


def _sentence_spans(text: str) -> list[tuple[int, int]]:
    spans, start = [], 0
    for match in _SENTENCE_END.finditer(text):
        spans.append((start, match.end()))
        start = match.end()
    if start < len(text):
        spans.append((start, len(text)))
    return spans


def _split_long(text: str, base_offset: int) -> list[tuple[int, str]]:
    """Greedy sentence packing under the chunk cap; a single oversized
    sentence is hard-cut."""
    pieces: list[tuple[int, str]] = []
    group_start: Optional[int] = None
    group_end = 0
    for start, end in _sentence_spans(text):
        if end - start > MAX_CHUNK:
            if group_start is not None:
                pieces.append((group_start, text[group_start:group_end]))
                group_start = None
            for cut in range(start, end, MAX_CHUNK):
                pieces.append((cut, text[cut:min(cut + MAX_CHUNK, end)]))
            continue
        if group_start is None:
            group_start, group_end = start, end
        elif end - group_start <= MAX_CHUNK:
            group_end = end
        else:
            pieces.append((group_start, text[group_start:group_end]))
            group_start, group_end = start, end
    if group_start is not None:
        pieces.append((group_start, text[group_start:group_end]))
    out = []
    for start, piece in pieces:
        lead = len(piece) - len(piece.lstrip())
        stripped = piece.strip()
        if stripped:
            out.append((base_offset + start + lead, stripped))
    return out


def _emit(chunks: list[Chunk], uri: str, section: str, offset: int, text: str) -> None:
    text = text.strip()
    if not text:
        return
    if len(text) <= MAX_CHUNK:
        chunks.append(Chunk(document_uri=uri, section_title=section, offset=offset, text=text))
        return
    for sub_offset, sub_text in _split_long(text, offset):
        chunks.append(Chunk(document_uri=uri, section_title=section, offset=sub_offset, text=sub_text))


def chunk_markdown(uri: str, text: str) -> list[Chunk]:
    """Headings set the section title; blank lines delimit paragraphs;
    paragraphs over the cap split at sentence boundaries."""
    chunks: list[Chunk] = []
    section = ""
    block_lines: list[str] = []
    block_start = 0
    position = 0

    def flush() -> None:
        nonlocal block_lines
        if block_lines:
            _emit(chunks, uri, section, block_start, "\n".join(block_lines))
            block_lines = []

    for line in text.split("\n"):
        heading = _HEADING.match(line)
        if heading:
            flush()
            section = heading.group(2)
        elif not line.strip():
            flush()
        else:
            if not block_lines:
                block_start = position
            block_lines.append(line)
        position += len(line) + 1
    flush()
    return chunks


class _HtmlDoc(HTMLParser):
    """Headings, paragraphs, list items, and code blocks only; script,
    style, and navigation subtrees are dropped wholesale."""

    SKIP = {"script", "style", "nav", "header", "footer", "aside"}
    HEADINGS = {"h1", "h2", "h3", "h4", "h5", "h6"}
    BLOCKS = {"p", "pre", "li"}

    def __init__(self, uri: str, raw: str):
        super().__init__()
        self.uri = uri
        self.chunks: list[Chunk] = []
        self.section = ""
        self._skip_depth = 0
        self._capture: Optional[str] = None  # "heading" | "block"
        self._buffer: list[str] = []
        self._block_offset = 0
        self._line_starts = [0]
        for i, ch in enumerate(raw):
            if ch == "\n":
                self._line_starts.append(i + 1)

    def _offset(self) -> int:
        line, col = self.getpos()
        return self._line_starts[line - 1] + col

    def handle_starttag(self, tag, attrs):
        if tag in self.SKIP:
            self._skip_depth += 1
        elif self._skip_depth == 0:
            if tag in self.HEADINGS:
                self._capture, self._buffer = "heading", []
            elif tag in self.BLOCKS and self._capture is None:
                self._capture, self._buffer = "block", []
                self._block_offset = self._offset()

    def handle_endtag(self, tag):
        if tag in self.SKIP:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif self._skip_depth == 0:
            if tag in self.HEADINGS and self._capture == "heading":
                self.section = " ".join("".join(self._buffer).split())
                self._capture = None
            elif tag in self.BLOCKS and self._capture == "block":
                _emit(self.chunks, self.uri, self.section, self._block_offset, "".join(self._buffer))
                self._capture = None

    def handle_data(self, data):
        if self._capture is not None and self._skip_depth == 0:
            self._buffer.append(data)


def chunk_html(uri: str, text: str) -> list[Chunk]:
    parser = _HtmlDoc(uri, text)
    parser.feed(text)
    parser.close()
    return parser.chunks


def chunk_document(uri: str, text: str) -> list[Chunk]:
    lowered = uri.lower()
    if lowered.endswith((".html", ".htm")) or text.lstrip()[:1] == "<":
        return chunk_html(uri, text)
    return chunk_markdown(uri, text)


def ingest(source) -> list[Chunk]:
    """Chunk a documentation directory or an explicit URL list; sources
    that cannot be read are skipped with a warning."""
    chunks: list[Chunk] = []
    if isinstance(source, (str, Path)) and Path(source).is_dir():
        paths = sorted(
            p for p in Path(source).rglob("*") if p.suffix.lower() in (".md", ".markdown", ".html", ".htm")
        )
        for path in paths:
            try:
                text = path.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                log.warning("skipping unreadable source %s: %s", path, exc)
                continue
            chunks.extend(chunk_document(path.as_uri(), text))
        return chunks
    for url in source:
        try:
            response = requests.get(url, timeout=10)
            response.raise_for_status()
        except requests.RequestException as exc:
            log.warning("skipping unreachable source %s: %s", url, exc)
            continue
        chunks.extend(chunk_document(url, response.text))
    return chunks


# -------------------------------------------------------------------- indexing


@dataclass(frozen=True)
class IndexedChunk:
    chunk_id: str
    vector: EmbeddingVector
    chunk: Chunk


@dataclass
class VectorIndex:
    entries: list

    def __post_init__(self):
        self.validate()

    @property
    def dimension(self) -> int:
        return self.entries[0].vector.dimension if self.entries else 0

    def __len__(self) -> int:
        return len(self.entries)

    def validate(self) -> None:
        seen = set()
        for entry in self.entries:
            if entry.chunk_id in seen:
                raise SearchError(f"duplicate chunk id {entry.chunk_id}")
            seen.add(entry.chunk_id)
            if entry.vector.dimension != self.dimension:
                raise SearchError(
                    f"{entry.chunk_id}: dimension {entry.vector.dimension} != index dimension {self.dimension}"
                )


def build_index(chunks: Sequence[Chunk], provider: Provider) -> VectorIndex:
    if not chunks:
        raise SearchError("nothing to index: no chunks")
    vectors = provider.embed([c.text for c in chunks])
    return VectorIndex(
        entries=[
            IndexedChunk(chunk_id=c.chunk_id, vector=v, chunk=c) for c, v in zip(chunks, vectors)
        ]
    )


def save_index(index: VectorIndex, path) -> Path:
    """Versioned binary: magic + (version, dimension, count) header,
    packed little-endian float32 vectors, JSON metadata. Written to a
    temp file and swapped in atomically."""
    path = Path(path)
    dim, count = index.dimension, len(index.entries)
    blob = bytearray(INDEX_MAGIC)
    blob += struct.pack("<HII", INDEX_VERSION, dim, count)
    for entry in index.entries:
        blob += struct.pack(f"<{dim}f", *entry.vector.values)
    metadata = [
        {
            "id": e.chunk_id,
            "uri": e.chunk.document_uri,
            "section": e.chunk.section_title,
            "offset": e.chunk.offset,
            "text": e.chunk.text,
        }
        for e in index.entries
    ]
    blob += json.dumps(metadata, sort_keys=True).encode("utf-8")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(blob))
    os.replace(tmp, path)
    return path


def load_index(path) -> VectorIndex:
    raw = Path(path).read_bytes()
    if raw[:4] != INDEX_MAGIC:
        raise SearchError(f"{path}: not an index file")
    version, dim, count = struct.unpack_from("<HII", raw, 4)
    if version != INDEX_VERSION:
        raise SearchError(f"{path}: unsupported index version {version}")
    cursor = 4 + struct.calcsize("<HII")
    vectors = []
    for _ in range(count):
        vectors.append(struct.unpack_from(f"<{dim}f", raw, cursor))
        cursor += dim * 4
    metadata = json.loads(raw[cursor:].decode("utf-8"))
    if len(metadata) != count:
        raise SearchError(f"{path}: metadata length {len(metadata)} != count {count}")
    entries = []
    for values, meta in zip(vectors, metadata):
        chunk = Chunk(
            document_uri=meta["uri"],
            section_title=meta["section"],
            offset=meta["offset"],
            text=meta["text"],
        )
        entries.append(IndexedChunk(chunk_id=meta["id"], vector=EmbeddingVector(values=values), chunk=chunk))
    return VectorIndex(entries=entries)


def ingest_to_index(source, provider: Provider, out_path) -> VectorIndex:
    """Ingest → embed → persist; nothing is written if embedding fails."""
    index = build_index(ingest(source), provider)
    save_index(index, out_path)
    return index


# ------------------------------------------------------------------- retrieval


def retrieve(query: str, index: VectorIndex, provider: Provider, k: int = DEFAULT_K) -> list[tuple[Chunk, float]]:
    """Exact cosine top-k, descending; ties break on chunk id."""
    if not index.entries:
        return []
    query_vector = provider.embed([query])[0]
    scored = [(cosine(query_vector, e.vector), e) for e in index.entries]
    scored.sort(key=lambda pair: (-pair[0], pair[1].chunk_id))
    return [(entry.chunk, score) for score, entry in scored[:k]]


def citation(chunk: Chunk) -> str:
    return f"[source: {chunk.document_uri}#{chunk.section_title}]"


def answer(query: str, retrieved: Sequence[tuple[Chunk, float]], provider: Provider) -> str:
    """Grounded answer over the retrieved chunks, annotated with each
    chunk's provenance. No documentation means no provider call."""
    if not retrieved:
        return NO_DOCS_ANSWER
    context = "\n\n".join(f"{citation(chunk)}\n{chunk.text}" for chunk, _score in retrieved)
    prompt = fill_prompt(prompt_template("doc-answer"), question=query, context=context)
    request = ChatRequest(system_prompt="You answer from documentation.", messages=(("user", prompt),))
    text = provider.complete(request).strip()
    sources = []
    for chunk, _score in retrieved:
        line = citation(chunk)
        if line not in sources:
            sources.append(line)
    return text + "\n\nSources:\n" + "\n".join(sources)
