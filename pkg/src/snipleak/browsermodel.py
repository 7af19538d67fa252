"""Abstract browser: page loading, frame trees, and sandboxed agents.

Two agent kinds run effect programs against a loaded page.  Applets may only
open network connections back to the host their code came from and never
touch the DOM; scripts read the DOM of same-origin frames and may fetch
subresources from anywhere, but never open raw sockets.  Policy violations
are recorded on the transcript and execution continues.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional
from urllib.parse import quote_plus

from . import pagemodel
from .netfabric import LOOPBACK, ConnectionRefused, Fabric, ResolutionError, Stream
from .pagemodel import (FrameEntry, FrameTree, HtmlNode, NodeKind, Origin,
                        Scheme, iter_nodes, node_at, subtree_text)

APPLET_CODE_PATH = "/applet"


class AgentKind(Enum):
    APPLET = "applet"
    SCRIPT = "script"


class PageLoadError(RuntimeError):
    """Main document or one of its subresources failed to load or parse."""


@dataclass
class Agent:
    """Effect program attached to a loaded page."""

    kind: AgentKind
    origin: Origin            # applet: codebase origin; script: embedding frame origin
    program: list[dict]
    label: str = ""


@dataclass
class EffectOutcome:
    ok: bool
    value: Any = None
    error: str = ""


def same_origin_check(a: Origin, b: Origin) -> bool:
    """Exact (scheme, host, port) equality; nothing weaker counts."""
    return a.scheme is b.scheme and a.host == b.host and a.port == b.port


def _looks_like_address(host: str) -> bool:
    parts = host.split(".")
    return len(parts) == 4 and all(p.isdigit() for p in parts)


class Browser:
    """One host's browsing context on a fabric."""

    def __init__(self, fabric: Fabric, host_name: str,
                 proxy: Optional[tuple[str, int]] = None):
        self.fabric = fabric
        self.host_name = host_name
        self.proxy = proxy
        self.tree: Optional[FrameTree] = None
        self.agents: list[Agent] = []
        self.closed = False

    # ---- fetching --------------------------------------------------------

    def _address_of(self, host: str) -> str:
        if host in (LOOPBACK, "localhost") or _looks_like_address(host):
            return LOOPBACK if host == "localhost" else host
        return self.fabric.resolve(self.host_name, host)

    def fetch(self, url: str, actor: str) -> bytes:
        origin, target = pagemodel.split_url(url)
        secure = origin.scheme is Scheme.SECURE
        loopback = origin.host in (LOOPBACK, "localhost")
        try:
            if self.proxy is not None and not loopback and not secure:
                # Explicit proxy setting: absolute-URI request to the proxy
                # endpoint, name resolution left to the proxy.
                request = f"GET {url} HTTP/1.0\r\nHost: {origin.host}\r\n\r\n"
                stream = self.fabric.connect(
                    self.host_name, self.proxy[0], self.proxy[1],
                    request.encode("latin-1"), secure=False, actor=actor)
            else:
                address = self._address_of(origin.host)
                request = f"GET {target} HTTP/1.0\r\nHost: {origin.host}\r\n\r\n"
                stream = self.fabric.connect(
                    self.host_name, address, origin.port,
                    request.encode("latin-1"), secure=secure, actor=actor)
            raw = self.fabric.deliver(stream)
        except (ConnectionRefused, ResolutionError) as exc:
            raise PageLoadError(f"fetch of {url} failed: {exc}") from exc
        head, _, body = raw.partition(b"\r\n\r\n")
        status_parts = head.split(b"\r\n")[0].split(b" ", 2)
        if len(status_parts) < 2 or status_parts[1] != b"200":
            raise PageLoadError(f"fetch of {url} returned {head.decode('latin-1')!r}")
        return body

    # ---- page loading ------------------------------------------------------

    def load_page(self, url: str) -> FrameTree:
        body = self.fetch(url, actor="browser")
        try:
            doc = pagemodel.parse_page(body)
        except pagemodel.ParseError as exc:
            raise PageLoadError(f"page at {url} failed to parse: {exc}") from exc
        tree = FrameTree()
        agents: list[Agent] = []
        self._attach(tree, agents, doc, pagemodel.origin_of_url(url), None, None)
        self.tree = tree
        self.agents = agents
        self.fabric.log("page_loaded", host=self.host_name, url=url,
                        frames=len(tree.frames), agents=len(agents))
        return tree

    def _attach(self, tree: FrameTree, agents: list[Agent], doc: HtmlNode,
                origin: Origin, parent_id: Optional[int],
                owner_path: Optional[tuple[int, ...]]) -> None:
        frame_id = len(tree.frames)
        tree.frames.append(FrameEntry(frame_id, parent_id, origin, doc, owner_path))
        for path, node in iter_nodes(doc):
            if node.kind is NodeKind.FRAME:
                src = node.attrs["src"]
                sub_body = self.fetch(src, actor="browser")
                try:
                    sub_doc = pagemodel.parse_page(sub_body)
                except pagemodel.ParseError as exc:
                    raise PageLoadError(f"frame at {src} failed to parse: {exc}") from exc
                self._attach(tree, agents, sub_doc,
                             pagemodel.origin_of_url(src), frame_id, path)
            elif node.kind is NodeKind.APPLET:
                codebase = node.attrs["codebase"]
                code_url = codebase.rstrip("/") + APPLET_CODE_PATH
                program_bytes = self.fetch(code_url, actor="browser")
                try:
                    program = json.loads(program_bytes.decode("utf-8"))
                except ValueError as exc:
                    raise PageLoadError(f"applet program at {code_url} is not JSON") from exc
                agents.append(Agent(AgentKind.APPLET, pagemodel.origin_of_url(codebase),
                                    program, label=f"applet@{origin.host}"))
            elif node.kind is NodeKind.SCRIPT:
                text = subtree_text(node).strip()
                if not text:
                    continue
                try:
                    program = json.loads(text)
                except ValueError:
                    self.fabric.log("script_skipped", host=self.host_name,
                                    reason="program is not JSON")
                    continue
                agents.append(Agent(AgentKind.SCRIPT, origin, program,
                                    label=f"script@{origin.host}"))

    # ---- DOM access with origin checks ----------------------------------------

    def dom_find(self, accessor: Origin, marker: str = "", tag: str = "") -> Optional[dict]:
        """Locate a node by marker attribute or tag, in accessor-origin frames only."""
        if self.tree is None:
            return None
        for entry in self.tree.frames:
            if not same_origin_check(entry.origin, accessor):
                continue
            for path, node in iter_nodes(entry.doc):
                if marker and node.attrs.get("data-marker") == marker:
                    return {"frame": entry.frame_id, "path": list(path)}
                if tag and node.tag == tag:
                    return {"frame": entry.frame_id, "path": list(path)}
        return None

    def dom_read(self, accessor: Origin, handle: dict) -> EffectOutcome:
        """Read a node: frames expose only their src, images only their name."""
        if self.tree is None or not isinstance(handle, dict):
            return EffectOutcome(False, error="path_error")
        entry = self.tree.frame_of(handle.get("frame", -1))
        if entry is None:
            return EffectOutcome(False, error="path_error")
        if not same_origin_check(entry.origin, accessor):
            self.fabric.log("violation", actor=accessor.label(), op="dom_read",
                            reason="cross-origin frame read",
                            target=entry.origin.label())
            return EffectOutcome(False, error="policy_violation")
        node = node_at(entry.doc, tuple(handle.get("path", ())))
        if node is None:
            return EffectOutcome(False, error="path_error")
        if node.kind is NodeKind.FRAME:
            return EffectOutcome(True, node.attrs.get("src", ""))
        if node.kind is NodeKind.IMAGE:
            return EffectOutcome(True, node.attrs.get("name", ""))
        return EffectOutcome(True, subtree_text(node))


# ---- effect programs ---------------------------------------------------------

def _substitute(value: Any, env: dict[str, str], results: list[Any]) -> Any:
    if isinstance(value, str):
        if value.startswith("$") and value[1:].isdigit():
            step = int(value[1:])
            return results[step - 1] if 1 <= step <= len(results) else None
        for key, replacement in env.items():
            value = value.replace("{" + key + "}", replacement)
        return value
    return value


def run_agent(browser: Browser, agent: Agent, env: Optional[dict[str, str]] = None,
              program: Optional[list[dict]] = None) -> list[tuple[dict, EffectOutcome]]:
    """Execute an agent's effect program step by step.

    String arguments may reference earlier results ("$1") or scenario
    variables ("{q}").  A policy violation fails the step, is logged, and the
    program keeps going.
    """
    if browser.closed:
        raise PageLoadError("browser is closed")
    env = env or {}
    steps = program if program is not None else agent.program
    results: list[Any] = []
    trace: list[tuple[dict, EffectOutcome]] = []
    for step in steps:
        args = {k: _substitute(v, env, results) for k, v in step.items() if k != "op"}
        outcome = _execute(browser, agent, step.get("op", ""), args)
        logged = outcome.value
        if isinstance(logged, Stream):
            logged = f"stream:{logged.stream_id}"
        browser.fabric.log("effect", actor=agent.label or agent.kind.value,
                           op=step.get("op", ""), ok=outcome.ok,
                           error=outcome.error,
                           value=logged if isinstance(logged, str) else None)
        results.append(outcome.value)
        trace.append((step, outcome))
    return trace


def _violation(browser: Browser, agent: Agent, op: str, reason: str) -> EffectOutcome:
    browser.fabric.log("violation", actor=agent.label or agent.kind.value,
                       op=op, reason=reason)
    return EffectOutcome(False, error="policy_violation")


def _execute(browser: Browser, agent: Agent, op: str, args: dict) -> EffectOutcome:
    if op == "connect":
        if agent.kind is not AgentKind.APPLET:
            return _violation(browser, agent, op, "raw sockets denied to scripts")
        host = args.get("host", "")
        if host != agent.origin.host:
            return _violation(browser, agent, op,
                              f"connect to {host!r} outside codebase host")
        payload = args.get("payload") or ""
        try:
            address = browser._address_of(host)
            stream = browser.fabric.connect(
                browser.host_name, address, int(args.get("port", 0)),
                payload.encode("latin-1"), actor=agent.label)
        except (ConnectionRefused, ResolutionError) as exc:
            return EffectOutcome(False, error=f"connect_failed: {exc}")
        return EffectOutcome(True, stream)

    if op == "read_stream":
        if agent.kind is not AgentKind.APPLET:
            return _violation(browser, agent, op, "raw sockets denied to scripts")
        stream = args.get("target")
        if not isinstance(stream, Stream):
            return EffectOutcome(False, error="path_error")
        return EffectOutcome(True, browser.fabric.deliver(stream).decode("latin-1"))

    if op == "dom_find":
        if agent.kind is not AgentKind.SCRIPT:
            return _violation(browser, agent, op, "DOM access denied to applets")
        handle = browser.dom_find(agent.origin, marker=args.get("marker", ""),
                                  tag=args.get("tag", ""))
        if handle is None:
            return EffectOutcome(False, error="not_found")
        return EffectOutcome(True, handle)

    if op == "dom_read":
        if agent.kind is not AgentKind.SCRIPT:
            return _violation(browser, agent, op, "DOM access denied to applets")
        return browser.dom_read(agent.origin, args.get("target"))

    if op == "exfiltrate":
        if agent.kind is not AgentKind.SCRIPT:
            return _violation(browser, agent, op, "subresource fetch denied to applets")
        data = args.get("data")
        if not isinstance(data, str) or not data:
            return EffectOutcome(False, error="missing_input")
        dest = args.get("dest", "")
        try:
            origin = pagemodel.origin_of_url(dest)
        except pagemodel.UrlError:
            return EffectOutcome(False, error="bad_dest")
        url = f"{origin.url_prefix()}/exfil?d={quote_plus(data)}"
        try:
            browser.fetch(url, actor=agent.label)
        except PageLoadError as exc:
            return EffectOutcome(False, error=f"fetch_failed: {exc}")
        return EffectOutcome(True, "")

    if op == "open_hidden_frame":
        if agent.kind is not AgentKind.SCRIPT:
            return _violation(browser, agent, op, "subresource fetch denied to applets")
        url = args.get("url", "")
        try:
            browser.fetch(url, actor=agent.label)
        except (PageLoadError, pagemodel.UrlError) as exc:
            return EffectOutcome(False, error=f"fetch_failed: {exc}")
        # Content loads in a zero-height frame; nothing is readable back.
        return EffectOutcome(True, "")

    return EffectOutcome(False, error=f"unknown_op: {op}")
