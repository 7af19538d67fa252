"""HTTP console API.

Exposes the running scenario over plain JSON endpoints so an external UI can
drive attack rounds, reconfigure the scenario, and tail the transcript:

    GET  /api/scenario            current config and scenario id
    POST /api/scenario            replace the scenario (rebuilds the runtime)
    POST /api/attack/query        submit one round: {"terms": ["..."]}
    GET  /api/history             all rounds so far, oldest first
    GET  /api/transcript?after=N  transcript events with seq > N
    GET  /api/matrix              run the full matrix and return the cells

Rebuilding the scenario keeps history: rounds from earlier configs stay in
the log with the scenario id they ran under.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from . import harness
from .attacker import RoundError
from .browsermodel import PageLoadError
from .harness import ConfigError, Runtime, ScenarioConfig
from .searchcore import QueryError


class ConsoleState:
    """Scenario runtime plus cross-rebuild round history, behind one lock."""

    def __init__(self, cfg: ScenarioConfig):
        self.lock = threading.Lock()
        self.history: list[dict] = []
        self.cfg = cfg
        self.runtime = harness.build_runtime(cfg)

    def rebuild(self, cfg: ScenarioConfig) -> None:
        self.runtime = harness.build_runtime(cfg)
        self.cfg = cfg

    def submit(self, terms: list[str]) -> dict:
        snippets = self.runtime.session.submit(terms)
        leak_class, _ = harness.classify_leak(self.runtime)
        entry = {
            "scenario_id": self.cfg.scenario_id(),
            "attack": self.cfg.attack,
            "mitigation": harness.scenario_label(self.cfg),
            "terms": list(terms),
            "snippets": [list(pair) for pair in snippets],
            "leak_class": leak_class.label,
        }
        self.history.append(entry)
        return entry

    def scenario_info(self) -> dict:
        return {
            "scenario_id": self.cfg.scenario_id(),
            "config": self.cfg.to_dict(),
            "rounds": len(self.history),
        }

    def transcript_after(self, after: int) -> list[dict]:
        return [e for e in self.runtime.fabric.events if e.get("seq", 0) > after]


def _make_handler(state: ConsoleState):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send(self, code: int, payload: dict | list) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(body)

        def _error(self, code: int, message: str) -> None:
            self._send(code, {"error": message})

        def _read_json(self) -> dict | None:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            try:
                parsed = json.loads(raw.decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                return None
            return parsed if isinstance(parsed, dict) else None

        def do_OPTIONS(self):  # CORS preflight
            self._send(200, {})

        def do_GET(self):
            url = urlsplit(self.path)
            with state.lock:
                if url.path == "/api/scenario":
                    self._send(200, state.scenario_info())
                elif url.path == "/api/history":
                    self._send(200, {"rounds": state.history})
                elif url.path == "/api/transcript":
                    params = parse_qs(url.query)
                    try:
                        after = int(params.get("after", ["0"])[0])
                    except ValueError:
                        self._error(400, "after must be an integer")
                        return
                    events = state.transcript_after(after)
                    self._send(200, {"events": events,
                                     "digest": state.runtime.fabric.transcript_digest()})
                elif url.path == "/api/matrix":
                    cells = harness.attack_matrix(seed=state.cfg.seed)
                    self._send(200, {"cells": [c.to_dict() for c in cells]})
                else:
                    self._error(404, "unknown endpoint")

        def do_POST(self):
            url = urlsplit(self.path)
            with state.lock:
                if url.path == "/api/scenario":
                    body = self._read_json()
                    if body is None:
                        self._error(400, "body must be a JSON object")
                        return
                    try:
                        cfg = ScenarioConfig.from_dict(body)
                    except ConfigError as exc:
                        self._error(400, str(exc))
                        return
                    try:
                        state.rebuild(cfg)
                    except Exception as exc:
                        self._error(409, f"scenario rebuild failed: {exc}")
                        return
                    self._send(200, state.scenario_info())
                elif url.path == "/api/attack/query":
                    body = self._read_json()
                    terms = body.get("terms") if body else None
                    if (not isinstance(terms, list) or not terms
                            or not all(isinstance(t, str) and t.strip() for t in terms)):
                        self._error(400, "terms must be a non-empty list of strings")
                        return
                    try:
                        entry = state.submit([t.strip() for t in terms])
                    except (RoundError, PageLoadError, QueryError) as exc:
                        self._error(400, f"round failed: {exc}")
                        return
                    self._send(200, entry)
                else:
                    self._error(404, "unknown endpoint")

    return Handler


def make_server(cfg: ScenarioConfig, port: int = 0,
                address: str = "127.0.0.1") -> tuple[ThreadingHTTPServer, ConsoleState]:
    """Bind the console API; port 0 picks a free one (server.server_port)."""
    state = ConsoleState(cfg)
    server = ThreadingHTTPServer((address, port), _make_handler(state))
    return server, state


def serve_forever(cfg: ScenarioConfig, port: int, address: str = "127.0.0.1") -> None:
    server, _ = make_server(cfg, port=port, address=address)
    print(f"console api listening on http://{address}:{server.server_port}",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
