"""Web search provider: deterministic pages and customization sanitizing.

Result pages are a pure function of the query string, so captured responses
replay byte-identically.  Page layout puts a sizable text pad right at the
top of the body; upstream splicing lands inside that pad regardless of query
or customization length, keeping post-splice pages parseable.  User-supplied
customization markup is reduced to an inert allowlist before it is embedded.
"""

from __future__ import annotations

import hashlib
import re
from urllib.parse import unquote_plus

from . import pagemodel
from .pagemodel import HtmlNode, NodeKind

PROVIDER_HOST = "websearch.test"
RESULT_COUNT = 5

# The pad must start before and end after every byte offset at which a
# response can be split twice (2 * segment size, headers included).
PAD_END = 5200
_PAD_WORDS = "tides shipping weather markets index news charts almanac "

_WORDS = (
    "alpha breeze cedar delta ember frost grove harbor iris juniper "
    "kestrel lumen meadow nectar opal pine quartz reef sable tundra"
).split()


# ---- lenient fragment parsing for hostile markup -------------------------

_TAG_RE = re.compile(
    r"<(?P<close>/?)(?P<name>[a-zA-Z][a-zA-Z0-9-]*)"
    r"(?P<attrs>(?:\"[^\"]*\"|'[^']*'|[^>\"'])*)(?P<self>/?)>")
_ATTR_RE = re.compile(
    r"([a-zA-Z_:][-a-zA-Z0-9_:.]*)\s*(?:=\s*(\"[^\"]*\"|'[^']*'|[^\s>]*))?")
_COMMENT_RE = re.compile(r"<!--.*?-->", re.DOTALL)
_DECL_RE = re.compile(r"<![^>]*>")
_NUM_ENTITY_RE = re.compile(r"&#(x[0-9a-fA-F]+|[0-9]+);")

_VOID_TAGS = {"img", "br", "hr", "input", "meta", "link", "area", "base", "col"}


def _decode_entities(value: str) -> str:
    def numeric(match: re.Match) -> str:
        body = match.group(1)
        code = int(body[1:], 16) if body.startswith(("x", "X")) else int(body)
        return chr(code) if 0 < code < 0x110000 else ""

    value = _NUM_ENTITY_RE.sub(numeric, value)
    value = value.replace("&apos;", "'")
    return pagemodel.unescape_text(value)


def _parse_attrs(raw: str) -> dict[str, str]:
    attrs: dict[str, str] = {}
    for match in _ATTR_RE.finditer(raw):
        key = match.group(1).lower()
        value = match.group(2) or ""
        if value[:1] in ("'", '"'):
            value = value[1:-1]
        attrs.setdefault(key, _decode_entities(value))
    return attrs


def parse_fragment_loose(markup: str) -> list[HtmlNode]:
    """Best-effort parse of arbitrary markup into page nodes.

    Unknown constructs degrade to text, unmatched close tags vanish, and
    open elements auto-close at end of input.  Nothing here executes; the
    output still has to pass the sanitizing filter.
    """
    markup = _COMMENT_RE.sub("", markup)
    markup = _DECL_RE.sub("", markup)
    root = pagemodel.element("fragment")
    stack: list[HtmlNode] = [root]
    pos = 0

    def emit_text(raw: str) -> None:
        if raw:
            stack[-1].children.append(pagemodel.text_node(_decode_entities(raw)))

    while pos < len(markup):
        lt = markup.find("<", pos)
        if lt < 0:
            emit_text(markup[pos:])
            break
        emit_text(markup[pos:lt])
        match = _TAG_RE.match(markup, lt)
        if not match:
            emit_text("<")
            pos = lt + 1
            continue
        pos = match.end()
        name = match.group("name").lower()
        if match.group("close"):
            for depth in range(len(stack) - 1, 0, -1):
                if stack[depth].tag == name:
                    del stack[depth:]
                    break
            continue
        attrs = _parse_attrs(match.group("attrs"))
        kind = {"iframe": NodeKind.FRAME, "frame": NodeKind.FRAME,
                "img": NodeKind.IMAGE, "image": NodeKind.IMAGE,
                "script": NodeKind.SCRIPT, "applet": NodeKind.APPLET,
                }.get(name, NodeKind.ELEMENT)
        tag = {NodeKind.FRAME: "iframe", NodeKind.IMAGE: "img"}.get(kind, name)
        node = HtmlNode(kind, tag, attrs, [])
        stack[-1].children.append(node)
        if not match.group("self") and name not in _VOID_TAGS and kind in (
                NodeKind.ELEMENT, NodeKind.SCRIPT):
            stack.append(node)
    return root.children


# ---- sanitizer -----------------------------------------------------------

ALLOWED_TAGS = {
    "a", "b", "blockquote", "body", "br", "center", "code", "div", "em",
    "font", "h1", "h2", "h3", "h4", "h5", "h6", "hr", "html", "i", "li",
    "ol", "p", "pre", "q", "s", "small", "span", "strong", "sub", "sup",
    "table", "td", "th", "tr", "u", "ul",
}
ALLOWED_ATTRS = {"align", "alt", "class", "color", "face", "height", "href",
                 "size", "title", "width"}
_URL_ATTRS = {"href"}
_SAFE_SCHEMES = {"http", "https"}


def _safe_url(value: str) -> bool:
    # Collapse whitespace and control characters that smuggle schemes past
    # naive prefix checks, then allowlist the scheme.
    compact = "".join(ch for ch in value if ord(ch) > 0x20 and ord(ch) != 0x7f).lower()
    head = re.split(r"[/?#]", compact, maxsplit=1)[0]
    if ":" not in head:
        return True
    return head.split(":", 1)[0] in _SAFE_SCHEMES


def _clean_nodes(nodes: list[HtmlNode]) -> list[HtmlNode]:
    cleaned: list[HtmlNode] = []
    for node in nodes:
        if node.kind is NodeKind.TEXT:
            if node.text:
                cleaned.append(pagemodel.text_node(node.text))
            continue
        if node.kind in (NodeKind.SCRIPT, NodeKind.APPLET, NodeKind.FRAME):
            continue  # active content is dropped wholesale, children included
        if node.kind is NodeKind.IMAGE:
            name = node.attrs.get("name", "")
            if re.fullmatch(r"[A-Za-z0-9._-]*", name):
                cleaned.append(pagemodel.image(name))
            continue
        children = _clean_nodes(node.children)
        if node.tag not in ALLOWED_TAGS or not pagemodel._NAME_RE.fullmatch(node.tag):
            cleaned.extend(children)  # unwrap unknown wrappers, keep inert content
            continue
        attrs = {}
        for key, value in node.attrs.items():
            if key.startswith("on") or key not in ALLOWED_ATTRS:
                continue
            if key in _URL_ATTRS and not _safe_url(value):
                continue
            attrs[key] = value
        cleaned.append(pagemodel.element(node.tag, attrs, children))
    return cleaned


def sanitize_customization(custom: str) -> str:
    """Reduce customization markup to inert allowlisted markup (idempotent)."""
    nodes = _clean_nodes(parse_fragment_loose(custom))
    return b"".join(pagemodel.serialize(node) for node in nodes).decode("utf-8")


# ---- result pages ----------------------------------------------------------

def fake_results(query: str, count: int = RESULT_COUNT) -> list[tuple[str, str, str]]:
    """Hash-derived (title, url, blurb) rows; a pure function of the query."""
    rows = []
    for i in range(count):
        digest = hashlib.sha256(f"{query}#{i}".encode("utf-8")).digest()
        words = [_WORDS[b % len(_WORDS)] for b in digest[:6]]
        title = " ".join(words[:3]).title()
        url = f"http://{words[3]}.example/{words[4]}"
        blurb = f"{' '.join(words)} {digest[6:10].hex()}"
        rows.append((title, url, blurb))
    return rows


def build_page(query: str, customization: str = "", pad_text: str = "") -> HtmlNode:
    custom_nodes = []
    if customization:
        custom_nodes = parse_fragment_loose(sanitize_customization(customization))
    rows = []
    for title, url, blurb in fake_results(query):
        rows.append(pagemodel.element("p", {"class": "w-row"}, [
            pagemodel.element("span", {"class": "w-title"}, [pagemodel.text_node(title)]),
            pagemodel.element("span", {"class": "w-url"}, [pagemodel.text_node(url)]),
            pagemodel.element("span", {"class": "w-blurb"}, [pagemodel.text_node(blurb)]),
        ]))
    body = pagemodel.element("body", {}, [
        pagemodel.element("div", {"class": "w-pad"}, [pagemodel.text_node(pad_text)]),
        pagemodel.element("p", {"class": "w-hdr"}, [pagemodel.text_node("web search")]),
        pagemodel.element("div", {"class": "w-custom"}, custom_nodes),
        pagemodel.element("p", {"class": "w-echo"},
                          [pagemodel.text_node(f"results for {query}")]),
        pagemodel.element("div", {"class": "w-results"}, rows),
    ])
    return pagemodel.element("html", {}, [body])


def handle_web_search(query: str, customization: str = "") -> HtmlNode:
    """Provider page for a query; deterministic for identical inputs."""
    skeleton = pagemodel.serialize(build_page(query, customization)).decode("utf-8")
    anchor = '<div class="w-pad">'
    pad_start = skeleton.index(anchor) + len(anchor)
    pad_len = max(PAD_END - pad_start, 0)
    pad_text = (_PAD_WORDS * (pad_len // len(_PAD_WORDS) + 1))[:pad_len]
    return build_page(query, customization, pad_text)


def build_response(query: str, customization: str = "") -> bytes:
    return b"HTTP/1.0 200 OK\r\n\r\n" + pagemodel.serialize(
        handle_web_search(query, customization))


def _bad_request(message: str) -> bytes:
    page = pagemodel.element("html", {}, [pagemodel.element(
        "body", {}, [pagemodel.element("p", {}, [pagemodel.text_node(message)])])])
    return b"HTTP/1.0 400 Bad Request\r\n\r\n" + pagemodel.serialize(page)


def service_handler(request: bytes, stream) -> bytes:
    """Fabric service: GET /search?q=...&c=... on the provider host."""
    from .interceptor import parse_http_request  # local import avoids cycles

    req = parse_http_request(request)
    if req is None or req.method != "GET":
        return _bad_request("bad request")
    target = req.target
    if target.startswith("http://") or target.startswith("https://"):
        try:
            _, target = pagemodel.split_url(target)
        except pagemodel.UrlError:
            return _bad_request("bad target")
    path, _, query_string = target.partition("?")
    if path != "/search":
        return _bad_request("unknown path")
    query = ""
    customization = ""
    for pair in query_string.split("&"):
        if pair.startswith("q="):
            query = unquote_plus(pair[2:])
        elif pair.startswith("c="):
            customization = unquote_plus(pair[2:])
    return build_response(query, customization)


def install(fabric, host_name: str, address: str, secure_port: bool = False) -> None:
    fabric.add_service(host_name, address, 80, service_handler)
    if secure_port:
        fabric.add_service(host_name, address, 443, service_handler)
