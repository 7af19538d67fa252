"""Victim-egress integration engine.

Classifies outbound requests as web searches (direct form or proxied form),
runs the detected query against the local index, and splices the rendered
block into the inbound response as an extra segment after the second one.
Original segments are never altered and request bytes are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional
from urllib.parse import unquote_plus

from . import pagemodel, searchcore
from .netfabric import Segment, Stream
from .searchcore import InvertedIndex, MitigationMode

SEARCH_PATH = "/search"


class QueryForm(Enum):
    DIRECT = "direct"
    PROXIED = "proxied"


@dataclass(frozen=True)
class DetectedQuery:
    """Search detected in an outbound request; terms come from the request only."""

    terms: tuple[str, ...]
    form: QueryForm
    provider_host: str


@dataclass(frozen=True)
class InterceptorConfig:
    mode: MitigationMode = MitigationMode.FULL
    provider_hosts: tuple[str, ...] = ("websearch.test",)
    proxy_only: Optional[tuple[str, int]] = None   # classify only streams to this endpoint
    local_port: int = searchcore.LOCAL_SERVER_PORT


@dataclass(frozen=True)
class ParsedRequest:
    method: str
    target: str
    version: str
    headers: dict[str, str]


def parse_http_request(raw: bytes) -> Optional[ParsedRequest]:
    try:
        text = raw.decode("latin-1")
    except Exception:
        return None
    head = text.split("\r\n\r\n", 1)[0]
    lines = head.split("\r\n")
    parts = lines[0].split(" ")
    if len(parts) != 3:
        return None
    method, target, version = parts
    headers: dict[str, str] = {}
    for line in lines[1:]:
        if not line:
            break
        if ":" not in line:
            return None
        key, value = line.split(":", 1)
        headers[key.strip().lower()] = value.strip()
    return ParsedRequest(method, target, version, headers)


def parse_query_terms(query_string: str) -> tuple[str, ...]:
    """Terms of the q parameter: plus/percent decoded, split on whitespace."""
    for pair in query_string.split("&"):
        if pair.startswith("q="):
            return tuple(unquote_plus(pair[2:]).split())
    return ()


def _split_target(target: str) -> tuple[str, str]:
    if "?" in target:
        path, query = target.split("?", 1)
        return path, query
    return target, ""


def classify_request(cfg: InterceptorConfig, stream: Stream) -> Optional[DetectedQuery]:
    """Decide whether an outbound request is a provider web search.

    Direct form: origin-relative GET of /search with a provider Host header.
    Proxied form: absolute-URI GET naming a provider host, as sent to an
    explicit proxy.  When proxy_only is set, only streams to that endpoint
    are considered at all.
    """
    if stream.secure:
        return None
    if cfg.proxy_only is not None and (stream.dst_addr, stream.dst_port) != cfg.proxy_only:
        return None
    req = parse_http_request(stream.request)
    if req is None or req.method != "GET" or not req.version.startswith("HTTP/1."):
        return None
    if req.target.startswith("/"):
        path, query = _split_target(req.target)
        host = req.headers.get("host", "").split(":")[0]
        if path == SEARCH_PATH and host in cfg.provider_hosts:
            terms = parse_query_terms(query)
            if terms:
                return DetectedQuery(terms, QueryForm.DIRECT, host)
        return None
    if req.target.startswith("http://"):
        try:
            origin, rest = pagemodel.split_url(req.target)
        except pagemodel.UrlError:
            return None
        path, query = _split_target(rest)
        if path == SEARCH_PATH and origin.host in cfg.provider_hosts:
            terms = parse_query_terms(query)
            if terms:
                return DetectedQuery(terms, QueryForm.PROXIED, origin.host)
    return None


def render_block_bytes(cfg: InterceptorConfig, idx: InvertedIndex,
                       detected: DetectedQuery) -> tuple[bytes, dict]:
    """Serialize the block for a detected query, or (b"", {}) when nothing renders."""
    if cfg.mode is MitigationMode.OFF:
        return b"", {}
    try:
        results = searchcore.query_index(idx, detected.terms)
    except searchcore.QueryError:
        return b"", {}
    if results.total_matches == 0:
        return b"", {}
    block = searchcore.render_local_block(results, cfg.mode, cfg.local_port)
    items = searchcore.block_items(results, cfg.mode, cfg.local_port)
    return pagemodel.serialize(block), items


def splice(cfg: InterceptorConfig, idx: InvertedIndex, detected: DetectedQuery,
           segments: list[Segment]) -> tuple[list[Segment], dict]:
    """Insert the rendered block as a new segment after the second one.

    Responses shorter than two segments get the block appended after the last
    one.  Existing segment payloads are copied through byte-identically.
    """
    block, items = render_block_bytes(cfg, idx, detected)
    if not block:
        return list(segments), {}
    insert_at = min(2, len(segments))
    ordered = [s.data for s in segments]
    ordered.insert(insert_at, block)
    return [Segment(i, data) for i, data in enumerate(ordered)], items


def integrate_stream(cfg: InterceptorConfig, idx: InvertedIndex, stream: Stream) -> Stream:
    """Apply integration to a classified stream in place; requests stay untouched."""
    if stream.detected is None or stream.secure:
        return stream
    before = len(stream.response_segments)
    spliced_segments, items = splice(cfg, idx, stream.detected, stream.response_segments)
    stream.response_segments = spliced_segments
    stream.spliced = len(spliced_segments) > before
    stream.block_items = items
    return stream


class Interceptor:
    """Egress observer wiring classify/splice into a fabric's victim streams."""

    def __init__(self, cfg: InterceptorConfig, idx: InvertedIndex, fabric):
        self.cfg = cfg
        self.idx = idx
        self.fabric = fabric

    def observe(self, stream: Stream) -> None:
        if stream.secure:
            return
        detected = classify_request(self.cfg, stream)
        if detected is not None:
            stream.detected = detected
            self.fabric.log("classified", stream=stream.stream_id,
                            terms=list(detected.terms), form=detected.form.value,
                            provider=detected.provider_host)

    def deliver_segments(self, stream: Stream) -> list[Segment]:
        if stream.detected is None:
            return stream.response_segments
        original_count = len(stream.response_segments)
        integrate_stream(self.cfg, self.idx, stream)
        if stream.spliced:
            insert_at = min(2, original_count)
            block_len = len(stream.response_segments[insert_at].data)
            self.fabric.log("spliced", stream=stream.stream_id,
                            mode=self.cfg.mode.value, insert_index=insert_at,
                            segments_before=original_count,
                            segments_after=len(stream.response_segments),
                            block_len=block_len, block=stream.block_items,
                            terms=list(stream.detected.terms))
        return stream.response_segments
