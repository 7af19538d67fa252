"""Deterministic in-process network fabric.

Hosts, a DNS table with hijack-race semantics, and request/response streams
whose responses travel as fixed-size segments.  Every observable step appends
one record to an in-memory transcript with a monotonic sequence number; runs
with the same inputs produce byte-identical transcripts.  The victim host's
egress is observed by a pluggable interceptor that may classify requests at
connect time and rewrite response segments at delivery time.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

SEGMENT_SIZE = 1460            # response payload bytes per segment
LOOPBACK = "127.0.0.1"


class FabricConfigError(ValueError):
    """Topology misconfiguration: duplicate hosts, patterns, or bad bindings."""


class ResolutionError(LookupError):
    """Name has no authentic record and no hijacker answered."""


class ConnectionRefused(ConnectionError):
    """No service listens at the destination address and port."""


class DeliveryError(RuntimeError):
    """Stream was reset before its response could be delivered."""


@dataclass(frozen=True)
class Segment:
    index: int
    data: bytes


@dataclass
class Host:
    name: str
    addresses: tuple[str, ...]
    is_victim: bool = False


@dataclass(frozen=True)
class Hijacker:
    pattern: str
    address: str
    owner: str


@dataclass
class DnsTable:
    records: dict[str, str] = field(default_factory=dict)
    hijackers: list[Hijacker] = field(default_factory=list)


@dataclass
class Stream:
    """One request/response exchange between two endpoints."""

    stream_id: int
    src_host: str
    src_addr: str
    dst_addr: str
    dst_port: int
    secure: bool
    actor: str
    request: bytes
    response_segments: list[Segment] = field(default_factory=list)
    detected: object = None          # set by the egress observer at connect time
    delivered: Optional[bytes] = None
    spliced: bool = False
    block_items: dict = field(default_factory=dict)
    reset: bool = False


def segment_response(data: bytes, size: int = SEGMENT_SIZE) -> list[Segment]:
    """Split response bytes into ordered fixed-size segments (last may be short)."""
    return [Segment(i, data[pos:pos + size])
            for i, pos in enumerate(range(0, len(data), size))]


ServiceHandler = Callable[[bytes, "Stream"], bytes]


class Fabric:
    """Single-threaded event loop owning hosts, DNS, services, and the transcript."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)
        self.hosts: dict[str, Host] = {}
        self.dns = DnsTable()
        self.services: dict[tuple[str, str, int], ServiceHandler] = {}
        self.events: list[dict] = []
        self.streams: list[Stream] = []
        self.egress_observer = None   # duck-typed: observe(stream), deliver_segments(stream)
        self._seq = 0
        self.log("fabric", seed=seed)

    # ---- topology -------------------------------------------------------

    def add_host(self, name: str, addresses: tuple[str, ...], is_victim: bool = False) -> Host:
        if name in self.hosts:
            raise FabricConfigError(f"duplicate host {name!r}")
        if is_victim and any(h.is_victim for h in self.hosts.values()):
            raise FabricConfigError("fabric already has a victim host")
        host = Host(name, tuple(addresses), is_victim)
        self.hosts[name] = host
        return host

    def add_dns_record(self, name: str, address: str) -> None:
        self.dns.records[name] = address

    def install_hijacker(self, pattern: str, address: str, owner: str) -> None:
        if any(h.pattern == pattern for h in self.dns.hijackers):
            raise FabricConfigError(f"hijacker already installed for {pattern!r}")
        if owner not in self.hosts:
            raise FabricConfigError(f"unknown hijack owner {owner!r}")
        self.dns.hijackers.append(Hijacker(pattern, address, owner))

    def add_service(self, host_name: str, address: str, port: int,
                    handler: ServiceHandler) -> None:
        host = self.hosts.get(host_name)
        if host is None:
            raise FabricConfigError(f"unknown host {host_name!r}")
        if address != LOOPBACK and address not in host.addresses:
            raise FabricConfigError(f"host {host_name!r} does not own address {address!r}")
        key = (host_name, address, port)
        if key in self.services:
            raise FabricConfigError(f"service already bound at {key!r}")
        self.services[key] = handler

    def set_egress_observer(self, observer) -> None:
        self.egress_observer = observer

    def victim(self) -> Optional[Host]:
        for host in self.hosts.values():
            if host.is_victim:
                return host
        return None

    # ---- transcript -------------------------------------------------------

    def log(self, event: str, **fields) -> dict:
        record = {"seq": self._seq, "event": event}
        record.update(fields)
        self.events.append(record)
        self._seq += 1
        return record

    def transcript_lines(self) -> list[str]:
        return [json.dumps(record, sort_keys=True, ensure_ascii=True)
                for record in self.events]

    def transcript_digest(self) -> str:
        payload = "\n".join(self.transcript_lines()) + "\n"
        return "sha256:" + hashlib.sha256(payload.encode("utf-8")).hexdigest()

    # ---- name resolution ---------------------------------------------------

    def resolve(self, requester: str, name: str) -> str:
        """DNS lookup with race semantics: a hijacker's forged answer arrives
        first and the authentic answer is discarded.  A hijacker never answers
        its own host's queries."""
        if name == "localhost" or name == LOOPBACK:
            return LOOPBACK
        for hijacker in self.dns.hijackers:
            if hijacker.owner != requester and fnmatch.fnmatchcase(name, hijacker.pattern):
                authentic = self.dns.records.get(name)
                self.log("resolve", requester=requester, name=name,
                         address=hijacker.address, hijacked=True,
                         discarded=authentic)
                return hijacker.address
        address = self.dns.records.get(name)
        if address is None:
            self.log("resolve", requester=requester, name=name, address=None,
                     hijacked=False, error="no record")
            raise ResolutionError(f"no DNS record for {name!r}")
        self.log("resolve", requester=requester, name=name, address=address,
                 hijacked=False)
        return address

    # ---- streams ------------------------------------------------------------

    def _route(self, src: Host, dst_addr: str) -> tuple[Optional[Host], str, bool]:
        if dst_addr in (LOOPBACK, "localhost"):
            return src, LOOPBACK, True
        for host in self.hosts.values():
            if dst_addr in host.addresses:
                return host, dst_addr, False
        return None, dst_addr, False

    def connect(self, src_host: str, dst_addr: str, dst_port: int, request: bytes,
                secure: bool = False, actor: str = "user") -> Stream:
        src = self.hosts.get(src_host)
        if src is None:
            raise FabricConfigError(f"unknown source host {src_host!r}")
        target, norm_addr, loopback = self._route(src, dst_addr)
        stream = Stream(
            stream_id=len(self.streams),
            src_host=src_host,
            src_addr=LOOPBACK if loopback else (src.addresses[0] if src.addresses else LOOPBACK),
            dst_addr=norm_addr,
            dst_port=dst_port,
            secure=secure,
            actor=actor,
            request=request,
        )
        handler = None
        if target is not None:
            handler = self.services.get((target.name, norm_addr, dst_port))
        fields = dict(stream=stream.stream_id, src=src_host, src_addr=stream.src_addr,
                      dst_addr=norm_addr, dst_port=dst_port, secure=secure, actor=actor,
                      refused=handler is None)
        if not secure:
            fields["request"] = request.decode("latin-1")
        fields["request_sha"] = hashlib.sha256(request).hexdigest()
        self.log("connect", **fields)
        if handler is None:
            raise ConnectionRefused(f"no service at {norm_addr}:{dst_port}")
        self.streams.append(stream)
        intercepted = src.is_victim and not loopback and self.egress_observer is not None
        if intercepted:
            # Egress interception happens before the request leaves the host.
            self.egress_observer.observe(stream)
        response = handler(stream.request, stream)
        stream.response_segments = segment_response(response)
        self.log("segment", stream=stream.stream_id,
                 count=len(stream.response_segments),
                 sizes=[len(s.data) for s in stream.response_segments])
        return stream

    def deliver(self, stream: Stream) -> bytes:
        """Hand the response to the receiving application, through the egress
        observer for victim-bound non-secure streams.  Idempotent per stream."""
        if stream.reset:
            raise DeliveryError(f"stream {stream.stream_id} was reset")
        if stream.delivered is not None:
            return stream.delivered
        segments = stream.response_segments
        src = self.hosts[stream.src_host]
        loopback = stream.dst_addr == LOOPBACK
        if (src.is_victim and not loopback and not stream.secure
                and self.egress_observer is not None):
            segments = self.egress_observer.deliver_segments(stream)
        data = b"".join(segment.data for segment in segments)
        stream.delivered = data
        self.log("deliver", stream=stream.stream_id, bytes=len(data),
                 spliced=stream.spliced,
                 request_sha=hashlib.sha256(stream.request).hexdigest())
        return data
