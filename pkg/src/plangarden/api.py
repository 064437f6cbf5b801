"""HTTP facade over the orchestrator: JSON endpoints plus a seq-tagged
line-stream of garden events for live UIs.

Every mutation maps 1:1 to an orchestrator call; no state lives only here.
The event stream replays from a client-supplied seq and then follows live,
delivering each event exactly once per connection, in seq order.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import (
    GardenError,
    InvalidTarget,
    KindViolation,
    PreconditionViolation,
    SeedAlreadyExists,
    SnapshotMissing,
    UnknownBackup,
    UnknownNode,
    EmptyText,
)
from .garden import Garden, Mode, NodeKind
from .orchestrator import EditKind, Orchestrator, UserEdit

EXCERPT_LENGTH = 120

_CONFLICTS = (SeedAlreadyExists, PreconditionViolation, KindViolation,
              SnapshotMissing, UnknownBackup)
_NOT_FOUND = (UnknownNode, InvalidTarget)
_UNPROCESSABLE = (EmptyText, ValueError)


def garden_view(orch: Orchestrator) -> dict[str, Any]:
    """Condensed snapshot for the UI: excerpted nodes plus progress state."""
    garden = orch.garden
    nodes = []
    for nid in sorted(garden.nodes):
        node = garden.nodes[nid]
        text = node.text
        excerpt = text[:EXCERPT_LENGTH] + ("…" if len(text) > EXCERPT_LENGTH else "")
        nodes.append({
            "id": node.id,
            "kind": node.kind.value,
            "status": node.status.value,
            "is_leaf": node.is_leaf,
            "assigned_submodule": node.assigned_submodule,
            "text_excerpt": excerpt,
            "parent": node.parent,
            "child_order": node.child_order,
        })
    return {
        "nodes": nodes,
        "in_progress_node": orch.current_node_id,
        "mode": garden.mode.value,
        "config": {
            "max_depth": garden.config.max_depth,
            "max_branching": garden.config.max_branching,
            "max_code_attempts": garden.config.max_code_attempts,
            "submodules": garden.config.roster_names(),
        },
        "last_seq": orch.log.last_seq,
    }


def node_detail(orch: Orchestrator, node_id: int) -> dict[str, Any]:
    node = orch.garden.node(node_id)
    payload = node.payload or {}
    return {
        "id": node.id,
        "kind": node.kind.value,
        "status": node.status.value,
        "is_leaf": node.is_leaf,
        "assigned_submodule": node.assigned_submodule,
        "text": node.text,
        "parent": node.parent,
        "child_order": node.child_order,
        "payload": payload,
        "screenshots": payload.get("screenshots", []),
        "feedback": payload.get("feedback"),
    }


class GardenService:
    """Registry of gardens, each backed by its own orchestrator and worker."""

    def __init__(self, make_orchestrator: Callable[[str], Orchestrator]) -> None:
        self._make = make_orchestrator
        self._gardens: dict[str, Orchestrator] = {}
        self._workers: dict[str, threading.Thread] = {}
        self._lock = threading.Lock()

    def create_garden(self) -> str:
        with self._lock:
            garden_id = f"g{len(self._gardens) + 1}"
            self._gardens[garden_id] = self._make(garden_id)
            return garden_id

    def get(self, garden_id: str) -> Orchestrator:
        try:
            return self._gardens[garden_id]
        except KeyError:
            raise UnknownNode(f"no garden {garden_id}") from None

    def ensure_playing(self, garden_id: str) -> None:
        """Run the play loop on a worker thread if one is not already going."""
        orch = self.get(garden_id)
        with self._lock:
            worker = self._workers.get(garden_id)
            if worker is not None and worker.is_alive():
                return
            worker = threading.Thread(target=orch.play, daemon=True)
            self._workers[garden_id] = worker
            worker.start()

    def join_worker(self, garden_id: str, timeout: float = 30.0) -> None:
        worker = self._workers.get(garden_id)
        if worker is not None:
            worker.join(timeout=timeout)


_ROUTES: list[tuple[str, re.Pattern, str]] = [
    ("POST", re.compile(r"^/gardens$"), "create_garden"),
    ("POST", re.compile(r"^/gardens/(?P<g>[\w-]+)/seed$"), "seed"),
    ("GET", re.compile(r"^/gardens/(?P<g>[\w-]+)$"), "get_garden"),
    ("GET", re.compile(r"^/gardens/(?P<g>[\w-]+)/nodes/(?P<n>\d+)$"), "get_node"),
    ("POST", re.compile(r"^/gardens/(?P<g>[\w-]+)/step$"), "step"),
    ("POST", re.compile(r"^/gardens/(?P<g>[\w-]+)/mode$"), "set_mode"),
    ("PATCH", re.compile(r"^/gardens/(?P<g>[\w-]+)/nodes/(?P<n>\d+)$"), "patch_node"),
    ("POST", re.compile(r"^/gardens/(?P<g>[\w-]+)/nodes/(?P<n>\d+)/compile-and-run$"),
     "compile_and_run"),
    ("POST", re.compile(r"^/gardens/(?P<g>[\w-]+)/restore$"), "restore"),
    ("GET", re.compile(r"^/gardens/(?P<g>[\w-]+)/events$"), "stream_events"),
]


class ApiHandler(BaseHTTPRequestHandler):
    service: GardenService  # injected by make_server
    protocol_version = "HTTP/1.1"

    # --- plumbing ---------------------------------------------------------

    def log_message(self, *args) -> None:
        pass

    def _body(self) -> dict[str, Any]:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        try:
            parsed = json.loads(self.rfile.read(length))
        except ValueError:
            raise ValueError("request body is not valid JSON") from None
        if not isinstance(parsed, dict):
            raise ValueError("request body must be a JSON object")
        return parsed

    def _send_json(self, status: int, doc: Any) -> None:
        data = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, method: str) -> None:
        path, _, query = self.path.partition("?")
        for route_method, pattern, name in _ROUTES:
            if route_method != method:
                continue
            match = pattern.match(path)
            if match is None:
                continue
            try:
                getattr(self, name)(query=query, **match.groupdict())
            except _NOT_FOUND as exc:
                self._send_json(404, {"error": str(exc)})
            except _CONFLICTS as exc:
                self._send_json(409, {"error": str(exc)})
            except _UNPROCESSABLE as exc:
                self._send_json(422, {"error": str(exc)})
            except GardenError as exc:
                self._send_json(500, {"error": str(exc)})
            except (BrokenPipeError, ConnectionResetError):
                pass
            return
        self._send_json(404, {"error": f"no route for {method} {path}"})

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    def do_PATCH(self) -> None:
        self._dispatch("PATCH")

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, PATCH, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    # --- endpoints -----------------------------------------------------------

    def create_garden(self, query: str) -> None:
        garden_id = self.service.create_garden()
        self._send_json(201, {"garden_id": garden_id})

    def seed(self, g: str, query: str) -> None:
        body = self._body()
        text = body.get("text")
        if not isinstance(text, str):
            raise ValueError("'text' must be a string")
        node_id = self.service.get(g).seed(text)
        self._send_json(201, {"node_id": node_id})

    def get_garden(self, g: str, query: str) -> None:
        self._send_json(200, garden_view(self.service.get(g)))

    def get_node(self, g: str, n: str, query: str) -> None:
        self._send_json(200, node_detail(self.service.get(g), int(n)))

    def step(self, g: str, query: str) -> None:
        orch = self.service.get(g)
        if orch.garden.mode is Mode.PAUSED:
            orch.set_mode(Mode.STEP)
        outcome = orch.step()
        self._send_json(200, {
            "idle": outcome.idle, "unit": outcome.unit, "node_id": outcome.node_id,
        })

    def set_mode(self, g: str, query: str) -> None:
        body = self._body()
        wanted = str(body.get("mode", "")).lower()
        mapping = {"play": Mode.PLAY, "pause": Mode.PAUSED, "step": Mode.STEP}
        if wanted not in mapping:
            raise ValueError("'mode' must be one of play, pause, step")
        orch = self.service.get(g)
        orch.set_mode(mapping[wanted])
        if mapping[wanted] is Mode.PLAY:
            self.service.ensure_playing(g)
        self._send_json(200, {"mode": orch.garden.mode.value})

    def patch_node(self, g: str, n: str, query: str) -> None:
        body = self._body()
        orch = self.service.get(g)
        node_id = int(n)
        results = []
        if "is_leaf" in body:
            if not isinstance(body["is_leaf"], bool):
                raise ValueError("'is_leaf' must be a boolean")
            results.append(orch.apply_edit(
                UserEdit(EditKind.TOGGLE_LEAF, node_id, body["is_leaf"])))
        if "text" in body:
            if not isinstance(body["text"], str):
                raise ValueError("'text' must be a string")
            results.append(orch.apply_edit(
                UserEdit(EditKind.EDIT_NODE_TEXT, node_id, body["text"])))
        if "feedback" in body:
            if not isinstance(body["feedback"], str):
                raise ValueError("'feedback' must be a string")
            results.append(orch.apply_edit(
                UserEdit(EditKind.EDIT_FEEDBACK, node_id, body["feedback"])))
        if not results:
            raise ValueError("nothing to edit: supply is_leaf, text, or feedback")
        self._send_json(200, {
            "removed": sorted({nid for r in results for nid in r.removed}),
            "backups": [r.backup_ref for r in results if r.backup_ref],
        })

    def compile_and_run(self, g: str, n: str, query: str) -> None:
        handle = self.service.get(g).compile_and_run_at(int(n))
        self._send_json(200, {"session": handle})

    def restore(self, g: str, query: str) -> None:
        body = self._body()
        backup_id = body.get("backup_id")
        if not isinstance(backup_id, str):
            raise ValueError("'backup_id' must be a string")
        restored = self.service.get(g).restore(backup_id)
        self._send_json(200, {"restored": restored})

    def stream_events(self, g: str, query: str) -> None:
        orch = self.service.get(g)
        params = dict(
            part.split("=", 1) for part in query.split("&") if "=" in part
        )
        cursor = int(params.get("from", 0))
        limit = int(params.get("limit", 0))  # 0 = follow forever

        self.close_connection = True
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        sent = 0
        try:
            while True:
                events = orch.log.wait_for(cursor, timeout=0.5)
                for event in events:
                    line = json.dumps({
                        "seq": event.seq,
                        "timestamp": event.timestamp,
                        "actor": event.actor,
                        "payload": event.payload,
                    }, sort_keys=True)
                    self.wfile.write(line.encode("utf-8") + b"\n")
                    cursor = event.seq
                    sent += 1
                    if limit and sent >= limit:
                        return
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            return


def make_server(service: GardenService, host: str = "127.0.0.1",
                port: int = 8642) -> ThreadingHTTPServer:
    handler = type("BoundApiHandler", (ApiHandler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve_forever(service: GardenService, host: str = "127.0.0.1",
                  port: int = 8642) -> None:
    server = make_server(service, host, port)
    print(f"garden API listening on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
