"""HTTP bridge for the human oracle and the browser console.

Endpoints (all JSON unless noted):
  GET  /oracle/pending               pending queries, wire form plus "id"
  POST /oracle/decision/{id}         submit a decision {kind, payload} or {"abandon": true};
                                     first accepted decision wins, duplicates get 409
  GET  /episodes                     episode directory names under the episodes root
  GET  /episodes/{id}/files          file listing for one episode
  GET  /episodes/{id}/files/{path}   raw file bytes
  GET  /...                          static console files, when a static dir is configured

The engine-facing HumanBackend enqueues a query and blocks until the console
answers or abandons it.
"""
from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from ..errors import OracleAbandonedError, OracleMalformedError
from .types import OracleDecision, OracleQuery, decision_from_wire, query_to_wire

_CONTENT_TYPES = {
    ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
    ".json": "application/json", ".png": "image/png", ".jsonl": "application/jsonl",
    ".map": "application/json", ".svg": "image/svg+xml",
}


@dataclass
class _PendingQuery:
    query: OracleQuery
    wire: dict
    event: threading.Event = field(default_factory=threading.Event)
    decision: OracleDecision | None = None
    error: Exception | None = None
    resolved: bool = False


class OracleBridge:
    """Thread-backed HTTP server holding the pending-decision queue."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 episodes_root: str | Path | None = None,
                 static_dir: str | Path | None = None,
                 decision_timeout_s: float = 600.0):
        self.host = host
        self.episodes_root = Path(episodes_root) if episodes_root else None
        self.static_dir = Path(static_dir) if static_dir else None
        self.decision_timeout_s = decision_timeout_s
        self._lock = threading.Lock()
        self._pending: dict[str, _PendingQuery] = {}
        self._resolved_ids: set[str] = set()  # exactly-once: acknowledged ids stay rejected
        bridge = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # silence default stderr chatter
                pass

            def _send(self, code: int, body: bytes, content_type="application/json"):
                self.send_response(code)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
                self.send_header("Access-Control-Allow-Headers", "Content-Type")
                self.end_headers()
                self.wfile.write(body)

            def _send_json(self, code: int, obj):
                self._send(code, json.dumps(obj).encode())

            def do_OPTIONS(self):
                self._send(204, b"")

            def do_GET(self):
                bridge._handle_get(self)

            def do_POST(self):
                bridge._handle_post(self)

        self._server = ThreadingHTTPServer((host, port), Handler)
        self.port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._server.shutdown()
        self._server.server_close()

    # -- engine side ---------------------------------------------------------

    def submit(self, query: OracleQuery) -> OracleDecision:
        qid = uuid.uuid4().hex
        entry = _PendingQuery(query=query, wire=query_to_wire(query))
        entry.wire["id"] = qid
        with self._lock:
            self._pending[qid] = entry
        try:
            if not entry.event.wait(self.decision_timeout_s):
                raise OracleAbandonedError(f"query {qid} timed out awaiting a decision")
            if entry.error is not None:
                raise entry.error
            return entry.decision
        finally:
            with self._lock:
                self._pending.pop(qid, None)

    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending)

    # -- HTTP side -----------------------------------------------------------

    def _handle_get(self, req: BaseHTTPRequestHandler):
        path = req.path.split("?")[0]
        if path == "/oracle/pending":
            with self._lock:
                out = [e.wire for e in self._pending.values() if not e.resolved]
            req._send_json(200, out)
            return
        if path == "/episodes":
            if self.episodes_root is None or not self.episodes_root.exists():
                req._send_json(200, [])
                return
            names = sorted(p.name for p in self.episodes_root.iterdir() if p.is_dir())
            req._send_json(200, names)
            return
        if path.startswith("/episodes/"):
            self._serve_episode(req, path)
            return
        self._serve_static(req, path)

    def _serve_episode(self, req, path: str):
        parts = [p for p in path.split("/") if p]
        if self.episodes_root is None or len(parts) < 3 or parts[2] != "files":
            req._send_json(404, {"error": "not found"})
            return
        ep_dir = (self.episodes_root / parts[1]).resolve()
        if not str(ep_dir).startswith(str(self.episodes_root.resolve())) or not ep_dir.is_dir():
            req._send_json(404, {"error": "unknown episode"})
            return
        if len(parts) == 3:
            files = sorted(
                str(p.relative_to(ep_dir)) for p in ep_dir.rglob("*") if p.is_file()
            )
            req._send_json(200, files)
            return
        target = (ep_dir / "/".join(parts[3:])).resolve()
        if not str(target).startswith(str(ep_dir)) or not target.is_file():
            req._send_json(404, {"error": "unknown file"})
            return
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        req._send(200, target.read_bytes(), ctype)

    def _serve_static(self, req, path: str):
        if self.static_dir is None:
            req._send_json(404, {"error": "not found"})
            return
        rel = "index.html" if path == "/" else path.lstrip("/")
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            req._send_json(404, {"error": "not found"})
            return
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        req._send(200, target.read_bytes(), ctype)

    def _handle_post(self, req: BaseHTTPRequestHandler):
        path = req.path.split("?")[0]
        if not path.startswith("/oracle/decision/"):
            req._send_json(404, {"error": "not found"})
            return
        qid = path.rsplit("/", 1)[-1]
        try:
            length = int(req.headers.get("Content-Length", "0"))
            data = json.loads(req.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            req._send_json(400, {"error": "invalid JSON body"})
            return
        with self._lock:
            entry = self._pending.get(qid)
            if entry is None or entry.resolved:
                if qid in self._resolved_ids or (entry is not None and entry.resolved):
                    req._send_json(409, {"error": "decision already accepted"})
                else:
                    req._send_json(404, {"error": f"unknown query id {qid}"})
                return
            if data.get("abandon"):
                entry.error = OracleAbandonedError(f"query {qid} abandoned by operator")
                entry.resolved = True
                self._resolved_ids.add(qid)
                entry.event.set()
                req._send_json(200, {"status": "abandoned"})
                return
            try:
                decision = decision_from_wire(data, entry.query)
            except OracleMalformedError as e:
                req._send_json(400, {"error": str(e)})
                return
            entry.decision = decision
            entry.resolved = True
            self._resolved_ids.add(qid)
            entry.event.set()
        req._send_json(200, {"status": "accepted"})


class HumanBackend:
    backend_id = "human"

    def __init__(self, bridge: OracleBridge):
        self.bridge = bridge

    def bind_episode(self, handle, episode_id: str, seed: int):
        del handle, episode_id, seed

    def query(self, q: OracleQuery) -> OracleDecision:
        return self.bridge.submit(q)


def make_human(bridge: OracleBridge) -> HumanBackend:
    return HumanBackend(bridge)
