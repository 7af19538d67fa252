"""Minimal HTML-like document trees with origins.

The testbed speaks a single canonical serialization: lowercase tags, sorted
double-quoted attributes, explicit close tags, and exactly four escaped
characters (& < > ") in text and attribute values.  parse_page is the strict
inverse of serialize on well-formed trees; everything that renders, splices,
or inspects pages goes through this module so byte layouts stay comparable
across runs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional


class Scheme(Enum):
    PLAIN = "plain"
    SECURE = "secure"


class NodeKind(Enum):
    ELEMENT = "element"
    TEXT = "text"
    FRAME = "frame"
    IMAGE = "image"
    SCRIPT = "script"
    APPLET = "applet"


class UrlError(ValueError):
    """URL falls outside the supported scheme://host[:port]/path[?query] subset."""


class ParseError(ValueError):
    """Malformed document; carries the byte position of the offending input."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at byte {position})")
        self.position = position


# Tags whose nodes get a dedicated kind; every other tag is a plain element.
_KIND_BY_TAG = {
    "iframe": NodeKind.FRAME,
    "img": NodeKind.IMAGE,
    "script": NodeKind.SCRIPT,
    "applet": NodeKind.APPLET,
}
_TAG_BY_KIND = {v: k for k, v in _KIND_BY_TAG.items()}

# Attribute a non-element kind cannot be built without.
_REQUIRED_ATTR = {
    NodeKind.FRAME: "src",
    NodeKind.IMAGE: "name",
    NodeKind.APPLET: "codebase",
}

_NAME_RE = re.compile(r"[a-z][a-z0-9-]*")

_SCHEME_BY_NAME = {"http": Scheme.PLAIN, "https": Scheme.SECURE}
_DEFAULT_PORT = {Scheme.PLAIN: 80, Scheme.SECURE: 443}


@dataclass(frozen=True)
class Origin:
    """Security principal: exact (scheme, host, port) triple."""

    scheme: Scheme
    host: str
    port: int

    def url_prefix(self) -> str:
        name = "http" if self.scheme is Scheme.PLAIN else "https"
        return f"{name}://{self.host}:{self.port}"

    def label(self) -> str:
        return f"{self.scheme.value},{self.host},{self.port}"


@dataclass
class HtmlNode:
    """One node of a page tree.

    Attributes:
        kind: structural role; drives both policy checks and serialization.
        tag: element name ("" for text nodes).
        attrs: attribute map; serialized in sorted key order.
        children: ordered children (empty for text nodes).
        text: character data (text nodes only).
    """

    kind: NodeKind
    tag: str = ""
    attrs: dict[str, str] = field(default_factory=dict)
    children: list["HtmlNode"] = field(default_factory=list)
    text: str = ""


def element(tag: str, attrs: Optional[dict[str, str]] = None,
            children: Optional[list[HtmlNode]] = None) -> HtmlNode:
    if tag in _KIND_BY_TAG:
        raise ValueError(f"tag {tag!r} is reserved for kind {_KIND_BY_TAG[tag].value}")
    return HtmlNode(NodeKind.ELEMENT, tag, dict(attrs or {}), list(children or []))


def text_node(data: str) -> HtmlNode:
    return HtmlNode(NodeKind.TEXT, text=data)


def frame(src: str, attrs: Optional[dict[str, str]] = None) -> HtmlNode:
    merged = dict(attrs or {})
    merged["src"] = src
    return HtmlNode(NodeKind.FRAME, "iframe", merged)


def image(name: str, attrs: Optional[dict[str, str]] = None) -> HtmlNode:
    merged = dict(attrs or {})
    merged["name"] = name
    return HtmlNode(NodeKind.IMAGE, "img", merged)


def script(program_text: str) -> HtmlNode:
    children = [text_node(program_text)] if program_text else []
    return HtmlNode(NodeKind.SCRIPT, "script", {}, children)


def applet(codebase: str, attrs: Optional[dict[str, str]] = None) -> HtmlNode:
    merged = dict(attrs or {})
    merged["codebase"] = codebase
    return HtmlNode(NodeKind.APPLET, "applet", merged)


# ---------------------------------------------------------------- escaping

def escape_text(value: str) -> str:
    return (value.replace("&", "&amp;")
                 .replace("<", "&lt;")
                 .replace(">", "&gt;")
                 .replace('"', "&quot;"))


def unescape_text(value: str) -> str:
    # Reverse order of escape_text so "&amp;lt;" round-trips correctly.
    return (value.replace("&lt;", "<")
                 .replace("&gt;", ">")
                 .replace("&quot;", '"')
                 .replace("&amp;", "&"))


# ------------------------------------------------------------ serialization

def serialize(node: HtmlNode) -> bytes:
    out: list[str] = []
    _write(node, out)
    return "".join(out).encode("utf-8")


def _write(node: HtmlNode, out: list[str]) -> None:
    if node.kind is NodeKind.TEXT:
        out.append(escape_text(node.text))
        return
    tag = node.tag
    if not _NAME_RE.fullmatch(tag or ""):
        raise ValueError(f"unsupported tag {tag!r}")
    expected = _KIND_BY_TAG.get(tag, NodeKind.ELEMENT)
    if node.kind is not expected:
        raise ValueError(f"tag {tag!r} cannot carry kind {node.kind.value}")
    required = _REQUIRED_ATTR.get(node.kind)
    if required and required not in node.attrs:
        raise ValueError(f"{node.kind.value} node missing required attr {required!r}")
    out.append(f"<{tag}")
    for key in sorted(node.attrs):
        if not _NAME_RE.fullmatch(key):
            raise ValueError(f"unsupported attribute name {key!r}")
        out.append(f' {key}="{escape_text(node.attrs[key])}"')
    out.append(">")
    for child in node.children:
        _write(child, out)
    out.append(f"</{tag}>")


# ------------------------------------------------------------------ parsing

class _Parser:
    """Strict recursive-descent parser for the canonical serialization."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, message: str) -> ParseError:
        byte_pos = len(self.text[:self.pos].encode("utf-8"))
        return ParseError(message, byte_pos)

    def parse_document(self) -> HtmlNode:
        nodes = self.parse_nodes(stop_tag=None)
        if not nodes:
            raise self.fail("empty document")
        if len(nodes) > 1:
            raise self.fail("multiple root nodes")
        return nodes[0]

    def parse_nodes(self, stop_tag: Optional[str]) -> list[HtmlNode]:
        nodes: list[HtmlNode] = []
        while self.pos < len(self.text):
            if self.text.startswith("</", self.pos):
                if stop_tag is None:
                    raise self.fail("close tag without matching open tag")
                end = self.text.find(">", self.pos)
                if end < 0:
                    raise self.fail("unterminated close tag")
                name = self.text[self.pos + 2:end]
                if name != stop_tag:
                    raise self.fail(f"mismatched close tag </{name}> (want </{stop_tag}>)")
                self.pos = end + 1
                return nodes
            if self.text[self.pos] == "<":
                nodes.append(self.parse_element())
            else:
                nodes.append(self.parse_text())
        if stop_tag is not None:
            raise self.fail(f"missing close tag </{stop_tag}>")
        return nodes

    def parse_text(self) -> HtmlNode:
        end = self.text.find("<", self.pos)
        if end < 0:
            end = len(self.text)
        raw = self.text[self.pos:end]
        self.pos = end
        return text_node(unescape_text(raw))

    def parse_element(self) -> HtmlNode:
        start = self.pos
        match = _NAME_RE.match(self.text, self.pos + 1)
        if not match:
            raise self.fail("malformed tag name")
        tag = match.group(0)
        self.pos = match.end()
        attrs: dict[str, str] = {}
        while True:
            if self.pos >= len(self.text):
                raise self.fail("unterminated open tag")
            ch = self.text[self.pos]
            if ch == ">":
                self.pos += 1
                break
            if ch != " ":
                raise self.fail("expected attribute or '>'")
            self.pos += 1
            key_match = _NAME_RE.match(self.text, self.pos)
            if not key_match:
                raise self.fail("malformed attribute name")
            key = key_match.group(0)
            if key in attrs:
                raise self.fail(f"duplicate attribute {key!r}")
            self.pos = key_match.end()
            if not self.text.startswith('="', self.pos):
                raise self.fail("attribute value must be double-quoted")
            self.pos += 2
            end = self.text.find('"', self.pos)
            if end < 0:
                raise self.fail("unterminated attribute value")
            attrs[key] = unescape_text(self.text[self.pos:end])
            self.pos = end + 1
        children = self.parse_nodes(stop_tag=tag)
        kind = _KIND_BY_TAG.get(tag, NodeKind.ELEMENT)
        required = _REQUIRED_ATTR.get(kind)
        if required and required not in attrs:
            self.pos = start
            raise self.fail(f"{kind.value} node missing required attr {required!r}")
        if kind is NodeKind.SCRIPT:
            if len(children) > 1 or (children and children[0].kind is not NodeKind.TEXT):
                self.pos = start
                raise self.fail("script node may hold a single text child")
        node = HtmlNode(kind, tag, attrs, children)
        return node


def parse_page(data: bytes | str) -> HtmlNode:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    return _Parser(text).parse_document()


# --------------------------------------------------------------- traversal

def iter_nodes(root: HtmlNode) -> Iterator[tuple[tuple[int, ...], HtmlNode]]:
    """Yield (path, node) pairs in document order; path indexes children."""
    stack: list[tuple[tuple[int, ...], HtmlNode]] = [((), root)]
    while stack:
        path, node = stack.pop(0)
        yield path, node
        for i, child in enumerate(node.children):
            stack.insert(i, (path + (i,), child))


def node_at(root: HtmlNode, path: tuple[int, ...]) -> Optional[HtmlNode]:
    node = root
    for index in path:
        if index < 0 or index >= len(node.children):
            return None
        node = node.children[index]
    return node


def subtree_text(node: HtmlNode) -> str:
    """Concatenated character data of the subtree, one text node per line."""
    parts = [n.text for _, n in iter_nodes(node) if n.kind is NodeKind.TEXT]
    return "\n".join(parts)


# ------------------------------------------------------------- frame trees

@dataclass
class FrameEntry:
    """One document in a loaded page: the root document or a subframe."""

    frame_id: int
    parent_id: Optional[int]
    origin: Origin
    doc: HtmlNode
    owner_path: Optional[tuple[int, ...]] = None  # path of the frame node in the parent doc


@dataclass
class FrameTree:
    """Root document plus subframe documents keyed by the frame nodes that spawned them."""

    frames: list[FrameEntry] = field(default_factory=list)

    @property
    def root(self) -> tuple[Origin, HtmlNode]:
        entry = self.frames[0]
        return entry.origin, entry.doc

    def subframes(self) -> list[tuple[Origin, HtmlNode]]:
        return [(f.origin, f.doc) for f in self.frames[1:]]

    def frame_of(self, frame_id: int) -> Optional[FrameEntry]:
        for entry in self.frames:
            if entry.frame_id == frame_id:
                return entry
        return None


# -------------------------------------------------------------------- URLs

_URL_RE = re.compile(
    r"^(?P<scheme>[a-z][a-z0-9+.-]*)://(?P<host>[^/:?#@]+)(?::(?P<port>\d+))?(?P<rest>[/?].*)?$"
)


def split_url(url: str) -> tuple[Origin, str]:
    """Break a URL into its origin and request target ('/path?query')."""
    match = _URL_RE.match(url)
    if not match:
        raise UrlError(f"unsupported URL: {url!r}")
    scheme = _SCHEME_BY_NAME.get(match.group("scheme"))
    if scheme is None:
        raise UrlError(f"unsupported scheme in {url!r}")
    host = match.group("host")
    if "@" in host or not host:
        raise UrlError(f"unsupported host in {url!r}")
    port_text = match.group("port")
    port = int(port_text) if port_text else _DEFAULT_PORT[scheme]
    if not 0 < port < 65536:
        raise UrlError(f"port out of range in {url!r}")
    rest = match.group("rest") or "/"
    if "#" in rest:
        raise UrlError(f"fragments unsupported: {url!r}")
    if rest.startswith("?"):
        rest = "/" + rest
    return Origin(scheme, host, port), rest


def origin_of_url(url: str) -> Origin:
    origin, _ = split_url(url)
    return origin
