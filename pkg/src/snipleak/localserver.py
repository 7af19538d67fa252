"""Loopback-only desktop search server.

Accepts a connection purely on its destination address: loopback is served,
anything else is refused, no matter what the source fields claim.  Responses
never travel through the egress interceptor because loopback streams never
leave the host.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import pagemodel, searchcore
from .interceptor import parse_http_request, parse_query_terms
from .netfabric import LOOPBACK, ConnectionRefused, Stream
from .pagemodel import HtmlNode, Origin, Scheme
from .searchcore import InvertedIndex, MitigationMode

LOCAL_ADDRESSES = (LOOPBACK, "localhost")


@dataclass(frozen=True)
class LocalServerConfig:
    port: int = searchcore.LOCAL_SERVER_PORT
    mode: MitigationMode = MitigationMode.FULL


def accept_connection(cfg: LocalServerConfig, destination_addr: str,
                      destination_port: int, source_addr: str = "",
                      source_host: str = "") -> bool:
    """Destination-based acceptance: loopback yes, everything else no.

    Source fields are deliberately ignored; a forged source must not open
    the server to remote callers, and a remote destination must never be
    served even to the machine's own user.
    """
    del source_addr, source_host
    return destination_addr in LOCAL_ADDRESSES and destination_port == cfg.port


def _display_mode(mode: MitigationMode) -> MitigationMode:
    # The user's own results page stays useful in every mode; only the modes
    # that restrict what characters exist at all (paths/images) carry over.
    if mode in (MitigationMode.NO_SNIPPETS, MitigationMode.IMAGES):
        return mode
    return MitigationMode.FULL


def results_page(cfg: LocalServerConfig, idx: InvertedIndex, raw_query: str) -> HtmlNode:
    """Full local results page for a query string (all matches)."""
    terms = tuple(raw_query.split())
    mode = _display_mode(cfg.mode)
    body_children: list[HtmlNode] = [
        pagemodel.element("p", {"class": "ls-title"},
                          [pagemodel.text_node("Desktop search")]),
        # Reflected input goes through a text node, never through markup.
        pagemodel.element("p", {"class": "ls-query"},
                          [pagemodel.text_node(f"results for: {raw_query}")]),
    ]
    try:
        matches = searchcore.all_matches(idx, terms)
    except searchcore.QueryError:
        matches = []
    body_children.append(pagemodel.element(
        "p", {"class": "ls-count"},
        [pagemodel.text_node(f"{len(matches)} files matched")]))
    for position, (path, snippet) in enumerate(matches):
        entry: list[HtmlNode] = [pagemodel.element(
            "span", {"class": "ls-path"}, [pagemodel.text_node(path)])]
        if mode is MitigationMode.FULL:
            entry.append(pagemodel.element(
                "span", {"class": "ls-snip"}, [pagemodel.text_node(snippet.text)]))
        elif mode is MitigationMode.IMAGES:
            entry = [pagemodel.image(searchcore.image_name(position))]
        body_children.append(pagemodel.element("p", {"class": "ls-entry"}, entry))
    return pagemodel.element("html", {}, [pagemodel.element("body", {}, body_children)])


def serve_iframe_page(cfg: LocalServerConfig, idx: InvertedIndex,
                      raw_query: str) -> tuple[HtmlNode, Origin]:
    """Content document for the integrated iframe, with its loopback origin."""
    page = results_page(cfg, idx, raw_query)
    return page, Origin(Scheme.PLAIN, LOOPBACK, cfg.port)


def _http(status: str, page: HtmlNode) -> bytes:
    return f"HTTP/1.0 {status}\r\n\r\n".encode("latin-1") + pagemodel.serialize(page)


def _error_page(message: str) -> HtmlNode:
    return pagemodel.element("html", {}, [pagemodel.element("body", {}, [
        pagemodel.element("p", {}, [pagemodel.text_node(message)])])])


def handle_local_search(cfg: LocalServerConfig, idx: InvertedIndex,
                        request: bytes) -> bytes:
    req = parse_http_request(request)
    if req is None or req.method != "GET":
        return _http("400 Bad Request", _error_page("bad request"))
    path, _, query = req.target.partition("?")
    if path != "/search":
        return _http("404 Not Found", _error_page("not found"))
    terms = parse_query_terms(query)
    raw_query = " ".join(terms)
    return _http("200 OK", results_page(cfg, idx, raw_query))


def install(fabric, cfg: LocalServerConfig, idx: InvertedIndex) -> None:
    """Bind the server to the victim's loopback address only."""
    victim = fabric.victim()
    if victim is None:
        raise ValueError("fabric has no victim host to serve on")

    def handler(request: bytes, stream: Stream) -> bytes:
        if not accept_connection(cfg, stream.dst_addr, stream.dst_port,
                                 stream.src_addr, stream.src_host):
            raise ConnectionRefused("local server accepts loopback destinations only")
        return handle_local_search(cfg, idx, request)

    fabric.add_service(victim.name, LOOPBACK, cfg.port, handler)
