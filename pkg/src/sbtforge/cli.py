"""The ``sbtforge`` command: serve the HTTP service, generate behaviors
offline, chat with a live agent, run one-shot questions, and manage the
documentation index.

Exit codes: 0 success, 1 error, 2 needs input (a disambiguation that
cannot be asked in non-interactive mode).

Configuration precedence is flags > environment > config file. The
provider section of the config file is shared with the service; script
files make every subcommand drivable without network access.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import uuid
from pathlib import Path
from typing import Optional, Sequence

import requests

from sbtforge.agents import load_template, scene_canonical
from sbtforge.assets import data_text
from sbtforge.linking import SynonymDictionary, UnresolvedTermError
from sbtforge.llm import (
    Provider,
    ProviderError,
    create_provider,
    load_config,
    script_synonyms,
    scripted_from_file,
)
from sbtforge.queries import QueryWorkflowError, answer_question
from sbtforge.rdf.terms import iri
from sbtforge.rdf.turtle import parse_turtle
from sbtforge.search import (
    SearchError,
    answer as answer_from_docs,
    ingest,
    ingest_to_index,
    load_index,
    retrieve,
)
from sbtforge.service import ServiceConfig, ServiceError, serve
from sbtforge.synthesis import BehaviorStore, SynthesisError, synthesize_behavior

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEEDS_INPUT = 2


# ------------------------------------------------------------- shared helpers


def _provider_from(args) -> Provider:
    if getattr(args, "script", None):
        return scripted_from_file(args.script)
    config = load_config(getattr(args, "config", None))
    return create_provider(config)


def _demo_world():
    graph = parse_turtle(data_text("blocksworld-agent.ttl"))
    template = load_template(graph, initial_knowledge=scene_canonical())
    return template, scene_canonical()


def _seed_synonyms(dictionary: SynonymDictionary, script_path) -> None:
    if not script_path:
        return
    for surface, uri in script_synonyms(script_path).items():
        dictionary.learn(surface, iri(uri), source="seed")


def render_outline(tree) -> str:
    lines = []

    def walk(node, depth):
        label = f"  {node.label!r}" if node.label else ""
        lines.append("  " * depth + node.kind + label)
        for child in node.children:
            walk(child, depth + 1)

    walk(tree.root_node, 0)
    return "\n".join(lines)


class _Capture:
    """Non-interactive ask_user: never answers, remembers what was asked
    so the candidates can go to stderr."""

    def __init__(self):
        self.surface = None
        self.candidates = ()

    def __call__(self, surface, candidates):
        if self.surface is None:
            self.surface = surface
            self.candidates = tuple(candidates)
        return None


def _terminal_ask(surface, candidates):
    print(f"Ambiguous term {surface!r}:")
    for i, c in enumerate(candidates):
        print(f"  [{i}] {c.label} ({c.confidence:.2f})")
    try:
        raw = input("choice (empty to abort): ").strip()
    except EOFError:
        return None
    return int(raw) if raw.isdigit() else None


# ----------------------------------------------------------------- subcommands


def cmd_serve(args) -> int:
    config = ServiceConfig(
        host=args.host or os.environ.get("SBTFORGE_HOST", "127.0.0.1"),
        port=args.port if args.port is not None else int(os.environ.get("SBTFORGE_PORT", "8080")),
        data_dir=Path(args.data_dir or os.environ.get("SBTFORGE_DATA_DIR", "sbtforge-data")),
        default_mode=args.mode or os.environ.get("SBTFORGE_MODE", "offline"),
        demo=not args.no_demo,
        provider_config=args.config,
    )
    provider = scripted_from_file(args.script) if args.script else None
    try:
        serve(config, provider=provider)
    except ServiceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        provider = _provider_from(args)
    except (ProviderError, OSError) as exc:
        print(f"provider unavailable: {exc}", file=sys.stderr)
        return EXIT_ERROR
    store_dir = Path(args.offline_store)
    template, kb = _demo_world()
    dictionary = SynonymDictionary("cli", directory=store_dir)
    _seed_synonyms(dictionary, args.script)
    ask = _terminal_ask if args.interactive else _Capture()
    try:
        outcome = synthesize_behavior(
            args.instruction,
            kb,
            template.goals,
            provider,
            dictionary,
            name=args.name,
            ask_user=ask,
        )
    except UnresolvedTermError as exc:
        if isinstance(ask, _Capture) and ask.surface is not None:
            print(f"needs disambiguation: {ask.surface!r}", file=sys.stderr)
            for i, c in enumerate(ask.candidates):
                print(f"  [{i}] {c.label} ({c.confidence:.2f})", file=sys.stderr)
            print("re-run with --interactive to choose", file=sys.stderr)
            return EXIT_NEEDS_INPUT
        print(str(exc), file=sys.stderr)
        return EXIT_NEEDS_INPUT if args.interactive else EXIT_ERROR
    except (SynthesisError, ProviderError, QueryWorkflowError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    path = BehaviorStore(store_dir).save(outcome.tree)
    print(render_outline(outcome.tree))
    print(f"saved {path}")
    return EXIT_OK


def cmd_query(args) -> int:
    try:
        provider = _provider_from(args)
    except (ProviderError, OSError) as exc:
        print(f"provider unavailable: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.kb:
        kb = parse_turtle(Path(args.kb).read_text(encoding="utf-8"))
    else:
        _template, kb = _demo_world()
    try:
        outcome = answer_question(args.question, kb, provider)
    except (QueryWorkflowError, ProviderError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    print(outcome.answer)
    if args.show_query:
        print(f"query: {outcome.query}", file=sys.stderr)
    return EXIT_OK


def cmd_console(args) -> int:
    session = args.session or f"console-{uuid.uuid4().hex[:8]}"
    chat_url = args.url.rstrip("/") + "/chat"
    pending_choices = 0

    def post(payload: dict) -> Optional[list[dict]]:
        payload.update({"session": session, "mode": "online"})
        for attempt in (1, 2):
            try:
                response = requests.post(chat_url, json=payload, timeout=30)
                response.raise_for_status()
                return response.json()["frames"]
            except requests.RequestException as exc:
                if attempt == 1:
                    print(f"connection lost ({exc}); retrying...", file=sys.stderr)
        print("service unreachable; session kept for reconnect", file=sys.stderr)
        return None

    print(f"connected to {args.url} (session {session}); Ctrl-D to leave")
    while True:
        try:
            line = input("> ")
        except EOFError:
            print()
            break
        line = line.strip()
        if not line:
            continue
        if pending_choices and line.isdigit() and int(line) < pending_choices:
            frames = post({"choice": int(line)})
        else:
            frames = post({"text": line})
        pending_choices = 0
        if frames is None:
            continue
        for frame in frames:
            kind = frame.get("type")
            if kind == "clarify":
                print(frame.get("text", ""))
                print("(answer with the option number)")
                pending_choices = len(frame.get("candidates", []))
            elif kind == "trace":
                print(f"[trace] {len(frame.get('entries', []))} nodes ticked")
            elif kind == "error":
                print(f"[error] {frame.get('text', '')}")
            else:
                print(frame.get("text", ""))
    print("session closed")
    return EXIT_OK


def cmd_docs_ingest(args) -> int:
    try:
        provider = _provider_from(args)
    except (ProviderError, OSError) as exc:
        print(f"provider unavailable: {exc}", file=sys.stderr)
        return EXIT_ERROR
    source = Path(args.source)
    if source.is_dir():
        target = source
    elif source.is_file():  # a file listing one URL per line
        target = [
            line.strip()
            for line in source.read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.startswith("#")
        ]
    else:
        print(f"source {args.source!r} is neither a directory nor a URL list", file=sys.stderr)
        return EXIT_ERROR
    try:
        index = ingest_to_index(target, provider, args.out)
    except (SearchError, ProviderError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    print(f"indexed {len(index.entries)} chunks into {args.out}")
    return EXIT_OK


def cmd_docs_ask(args) -> int:
    try:
        provider = _provider_from(args)
        index = load_index(args.index)
    except (ProviderError, SearchError, OSError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    retrieved = retrieve(args.question, index, provider)
    print(answer_from_docs(args.question, retrieved, provider))
    return EXIT_OK


# ---------------------------------------------------------------------- parser


def _add_provider_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--script", help="scripted-provider file (JSON rules)")
    parser.add_argument("--config", help="TOML config file with a [provider] section")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbtforge",
        description="Semantic-web agents with SPARQL behavior trees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--data-dir")
    p.add_argument("--mode", choices=("offline", "online"))
    p.add_argument("--no-demo", action="store_true", help="do not spawn the Blocks World demo")
    _add_provider_options(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("generate", help="turn an instruction into a stored behavior tree")
    p.add_argument("instruction")
    p.add_argument("--offline-store", default="behaviors", help="directory for saved behaviors")
    p.add_argument("--name", help="behavior name (defaults to a slug of the instruction)")
    p.add_argument("--interactive", action="store_true", help="resolve ambiguities on the terminal")
    _add_provider_options(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("console", help="chat with a live agent through a running service")
    p.add_argument("--url", default="http://127.0.0.1:8080")
    p.add_argument("--session", help="session id (kept across reconnects)")
    p.set_defaults(func=cmd_console)

    p = sub.add_parser("query", help="one-shot question over a knowledge base")
    p.add_argument("question")
    p.add_argument("--kb", help="Turtle file (defaults to the Blocks World scene)")
    p.add_argument("--show-query", action="store_true")
    _add_provider_options(p)
    p.set_defaults(func=cmd_query)

    docs = sub.add_parser("docs", help="documentation index maintenance")
    docs_sub = docs.add_subparsers(dest="docs_command", required=True)
    p = docs_sub.add_parser("ingest", help="chunk, embed, and store documentation")
    p.add_argument("--source", required=True, help="docs directory or URL-list file")
    p.add_argument("--out", default="index.bin")
    _add_provider_options(p)
    p.set_defaults(func=cmd_docs_ingest)
    p = docs_sub.add_parser("ask", help="answer a question from the index")
    p.add_argument("question")
    p.add_argument("--index", default="index.bin")
    _add_provider_options(p)
    p.set_defaults(func=cmd_docs_ask)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
