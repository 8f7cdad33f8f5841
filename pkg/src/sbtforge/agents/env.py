"""The Blocks World environment as its own Linked-Data server.

Agents act on the world only over HTTP: POST a Turtle request graph to
/apply, get back the full world snapshot (Turtle) or a 409 with the
violated precondition. Keeping the environment out-of-process-shaped
(real loopback sockets, not function calls) exercises the agents' REST
bindings for real.
"""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from sbtforge.agents.blocksworld import BW, BlocksWorldError, apply_action
from sbtforge.rdf.terms import RDF_TYPE, Graph, iri
from sbtforge.rdf.turtle import TurtleParseError, parse_turtle, serialize_turtle

# request class → (action name, argument properties in order)
_REQUEST_KINDS = {
    iri(BW + "PickUpRequest"): ("pickup", ("block",)),
    iri(BW + "PutDownRequest"): ("putdown", ("block",)),
    iri(BW + "StackRequest"): ("stack", ("block", "target")),
    iri(BW + "UnStackRequest"): ("unstack", ("block", "target")),
}
_ARG_PROPERTY = {"block": iri(BW + "block"), "target": iri(BW + "target")}


def decode_request(request: Graph) -> tuple[str, dict]:
    """(action, args) from a request graph; raises BlocksWorldError."""
    for cls, (action, arg_names) in _REQUEST_KINDS.items():
        subjects = request.subjects(RDF_TYPE, cls)
        if not subjects:
            continue
        if len(subjects) > 1:
            raise BlocksWorldError("more than one action request in the graph")
        subject = subjects[0]
        args = {}
        for name in arg_names:
            value = request.value(subject, _ARG_PROPERTY[name], None)
            if value is None:
                raise BlocksWorldError(f"request is missing bw:{name}")
            args[name] = value
        return action, args
    raise BlocksWorldError("no recognizable action request in the graph")


class EnvServer:
    """Owns the world graph; serves GET /world and POST /apply."""

    def __init__(self, world: Graph, host: str = "127.0.0.1", port: int = 0):
        self._world = world
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, status: int, body: bytes, content_type: str):
                self.send_response(status)
                self.send_header("Content-Type", content_type)
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path.rstrip("/") in ("", "/world"):
                    self._send(200, outer.world_turtle().encode("utf-8"), "text/turtle")
                else:
                    self._send(404, b"not found", "text/plain")

            def do_POST(self):
                if self.path.rstrip("/") != "/apply":
                    self._send(404, b"not found", "text/plain")
                    return
                length = int(self.headers.get("Content-Length", "0"))
                body = self.rfile.read(length).decode("utf-8")
                try:
                    request = parse_turtle(body)
                    action, args = decode_request(request)
                    new_world = outer.apply(action, args)
                except (TurtleParseError, BlocksWorldError) as exc:
                    self._send(409, str(exc).encode("utf-8"), "text/plain")
                    return
                self._send(200, serialize_turtle(new_world).encode("utf-8"), "text/turtle")

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "EnvServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def world_snapshot(self) -> Graph:
        with self._lock:
            return self._world.copy()

    def world_turtle(self) -> str:
        return serialize_turtle(self.world_snapshot())

    def apply(self, action: str, args: dict) -> Graph:
        with self._lock:
            new_world = apply_action(self._world, action, args)
            self._world = new_world
            return new_world.copy()

    def __enter__(self) -> "EnvServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
