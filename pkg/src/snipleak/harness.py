"""Scenario orchestration and leak accounting.

Builds complete scenarios (fabric, hosts, services, interceptor, attacker)
from a serializable config, drives the scripted attack rounds, classifies
what actually reached the attacker on a severity ladder, and checks the
structural invariants every transcript must satisfy.  Also owns the fixed
attack-by-mitigation matrix and its expected outcomes.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from . import attacker, interceptor, localserver, pagemodel, provider, searchcore
from .attacker import AttackServer, CannedResponse, InteractiveSession, MitmElement
from .browsermodel import Browser
from .interceptor import Interceptor, InterceptorConfig
from .localserver import LocalServerConfig
from .netfabric import LOOPBACK, Fabric
from .searchcore import Document, InvertedIndex, MitigationMode

logger = logging.getLogger(__name__)

# ---- topology ------------------------------------------------------------

VICTIM_HOST = "victim-pc"
VICTIM_ADDR = "10.7.0.2"
PROVIDER_HOST = "websearch.test"
PROVIDER_ADDR = "10.7.0.10"
ATTACK_HOST = "attack.test"
ATTACK_ADDR = "10.7.0.66"
NETPROXY_HOST = "proxy.test"
NETPROXY_ADDR = "10.7.0.3"
NETPROXY_PORT = 8080
DEFAULT_PROXY_ENDPOINT = (NETPROXY_ADDR, NETPROXY_PORT)

CANNED_QUERY = "sports scores"

FIXTURE_CORPUS: tuple[tuple[str, str], ...] = (
    ("C:/Users/vic/mail/web-passwords.txt",
     "master list of web passwords\nbank site password hunter2\n"
     "mail password swordfish\nshop password trustno1"),
    ("C:/Users/vic/notes/bank-codes.txt",
     "bank vault notes\nbank wire pin 4421 keep offline\nbank contact carla"),
    ("C:/Users/vic/notes/meeting.txt",
     "quarterly planning agenda\nbudget review and staffing follow ups"),
    ("C:/Users/vic/recipes/soup.txt",
     "tomato soup recipe\nsimmer tomatoes with basil and salt"),
)


class ConfigError(ValueError):
    """Scenario config rejected; message names the offending field."""


class InvariantViolation(AssertionError):
    """A transcript broke one of the structural guarantees."""


class LeakClass(IntEnum):
    """Severity ladder of what the attacker obtained."""

    NONE = 0
    FRAME_SRC_ONLY = 1
    IMAGE_NAMES = 2
    FILENAMES = 3
    SNIPPETS = 4

    @property
    def label(self) -> str:
        return self.name.lower()


_ATTACKS = ("none", "applet", "mitm_js")
_ACTOR_TRUSTED_PREFIXES = ("user", "browser", "service:")


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete, JSON-serializable description of one scenario."""

    seed: int = 0
    attack: str = "none"
    mitigation: MitigationMode = MitigationMode.FULL
    proxy_only: Optional[tuple[str, int]] = None
    provider_secure: bool = False
    corpus: tuple[tuple[str, str], ...] = FIXTURE_CORPUS
    query_script: tuple[tuple[str, ...], ...] = (("password",),)
    mitm_payload: Optional[tuple] = None
    applet_program: Optional[tuple] = None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "attack": self.attack,
            "mitigation": self.mitigation.value,
            "proxy_only": (
                {"address": self.proxy_only[0], "port": self.proxy_only[1]}
                if self.proxy_only else None),
            "provider_secure": self.provider_secure,
            "corpus": [{"path": p, "body": b} for p, b in self.corpus],
            "query_script": [list(q) for q in self.query_script],
            "mitm_payload": [dict(s) for s in self.mitm_payload] if self.mitm_payload else None,
            "applet_program": [dict(s) for s in self.applet_program] if self.applet_program else None,
        }

    @staticmethod
    def from_dict(raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config: expected an object")

        def fail(path: str, want: str):
            raise ConfigError(f"config.{path}: expected {want}")

        known = {"seed", "attack", "mitigation", "proxy_only", "provider_secure",
                 "corpus", "query_script", "mitm_payload", "applet_program"}
        for key in raw:
            if key not in known:
                raise ConfigError(f"config.{key}: unexpected field")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            fail("seed", "an integer")
        attack = raw.get("attack", "none")
        if attack not in _ATTACKS:
            fail("attack", f"one of {_ATTACKS}")
        mitigation_raw = raw.get("mitigation", "full")
        try:
            mitigation = MitigationMode(mitigation_raw)
        except ValueError:
            fail("mitigation", f"one of {[m.value for m in MitigationMode]}")
        proxy_raw = raw.get("proxy_only")
        proxy_only: Optional[tuple[str, int]] = None
        if proxy_raw is True:
            proxy_only = DEFAULT_PROXY_ENDPOINT
        elif isinstance(proxy_raw, dict):
            address = proxy_raw.get("address")
            port = proxy_raw.get("port")
            if not isinstance(address, str) or not isinstance(port, int):
                fail("proxy_only", '{"address": str, "port": int}')
            proxy_only = (address, port)
        elif proxy_raw not in (None, False):
            fail("proxy_only", "true, null, or an endpoint object")
        provider_secure = raw.get("provider_secure", False)
        if not isinstance(provider_secure, bool):
            fail("provider_secure", "a boolean")
        corpus_raw = raw.get("corpus")
        if corpus_raw is None:
            corpus = FIXTURE_CORPUS
        else:
            if not isinstance(corpus_raw, list):
                fail("corpus", "a list of {path, body} objects")
            rows = []
            for i, entry in enumerate(corpus_raw):
                if (not isinstance(entry, dict) or not isinstance(entry.get("path"), str)
                        or not isinstance(entry.get("body"), str)):
                    fail(f"corpus[{i}]", '{"path": str, "body": str}')
                rows.append((entry["path"], entry["body"]))
            corpus = tuple(rows)
        script_raw = raw.get("query_script")
        if script_raw is None:
            query_script: tuple[tuple[str, ...], ...] = (("password",),)
        else:
            if not isinstance(script_raw, list) or not script_raw:
                fail("query_script", "a non-empty list of term lists")
            rounds = []
            for i, round_terms in enumerate(script_raw):
                if (not isinstance(round_terms, list) or not round_terms
                        or not all(isinstance(t, str) for t in round_terms)):
                    fail(f"query_script[{i}]", "a non-empty list of strings")
                rounds.append(tuple(round_terms))
            query_script = tuple(rounds)

        def program(name: str) -> Optional[tuple]:
            steps = raw.get(name)
            if steps is None:
                return None
            if not isinstance(steps, list) or not all(isinstance(s, dict) for s in steps):
                fail(name, "a list of effect objects")
            return tuple(steps)

        return ScenarioConfig(
            seed=seed, attack=attack, mitigation=mitigation, proxy_only=proxy_only,
            provider_secure=provider_secure, corpus=corpus, query_script=query_script,
            mitm_payload=program("mitm_payload"), applet_program=program("applet_program"))

    def scenario_id(self) -> str:
        digest = hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")).hexdigest()[:10]
        return f"{self.attack}-{scenario_label(self)}-{digest}"


def scenario_label(cfg: ScenarioConfig) -> str:
    if cfg.provider_secure:
        return "provider_secure"
    if cfg.proxy_only is not None:
        return "proxy_only"
    return cfg.mitigation.value


@dataclass
class LeakReport:
    scenario_id: str
    attack: str
    mitigation: str
    leak_class: LeakClass
    leaked_items: list[str]
    transcript_digest: str

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "attack": self.attack,
            "mitigation": self.mitigation,
            "leak_class": self.leak_class.label,
            "leaked_items": list(self.leaked_items),
            "transcript_digest": self.transcript_digest,
        }


@dataclass
class Runtime:
    """A fully wired scenario ready to take attack rounds."""

    cfg: ScenarioConfig
    fabric: Fabric
    idx: InvertedIndex
    session: InteractiveSession
    server: Optional[AttackServer] = None
    mitm: Optional[MitmElement] = None


def corpus_documents(corpus: tuple[tuple[str, str], ...]) -> list[Document]:
    return [Document(f"d{i}", path, body) for i, (path, body) in enumerate(corpus)]


def _netproxy_handler(fabric: Fabric):
    def handler(request: bytes, stream) -> bytes:
        req = interceptor.parse_http_request(request)
        if req is None or req.method != "GET" or not req.target.startswith("http://"):
            return b"HTTP/1.0 400 Bad Request\r\n\r\n"
        try:
            origin, target = pagemodel.split_url(req.target)
        except pagemodel.UrlError:
            return b"HTTP/1.0 400 Bad Request\r\n\r\n"
        # The proxy is a plain LAN box: it resolves names itself, subject to
        # whatever answers the local network serves it.
        address = fabric.resolve(NETPROXY_HOST, origin.host)
        upstream_request = f"GET {target} HTTP/1.0\r\nHost: {origin.host}\r\n\r\n"
        upstream = fabric.connect(NETPROXY_HOST, address, origin.port,
                                  upstream_request.encode("latin-1"),
                                  actor="service:proxy")
        return fabric.deliver(upstream)

    return handler


def build_runtime(cfg: ScenarioConfig) -> Runtime:
    fabric = Fabric(cfg.seed)
    fabric.log("scenario", attack=cfg.attack, mitigation=cfg.mitigation.value,
               label=scenario_label(cfg), proxy_only=list(cfg.proxy_only) if cfg.proxy_only else None,
               provider_secure=cfg.provider_secure, corpus_files=len(cfg.corpus))

    fabric.add_host(VICTIM_HOST, (VICTIM_ADDR,), is_victim=True)
    fabric.add_host(PROVIDER_HOST, (PROVIDER_ADDR,))
    fabric.add_host(ATTACK_HOST, (ATTACK_ADDR,))
    fabric.add_dns_record(PROVIDER_HOST, PROVIDER_ADDR)
    fabric.add_dns_record(ATTACK_HOST, ATTACK_ADDR)

    idx = searchcore.index_corpus(corpus_documents(cfg.corpus))

    local_cfg = LocalServerConfig(mode=cfg.mitigation)
    localserver.install(fabric, local_cfg, idx)
    provider.install(fabric, PROVIDER_HOST, PROVIDER_ADDR,
                     secure_port=cfg.provider_secure)

    icfg = InterceptorConfig(mode=cfg.mitigation, provider_hosts=(PROVIDER_HOST,),
                             proxy_only=cfg.proxy_only)
    fabric.set_egress_observer(Interceptor(icfg, idx, fabric))

    browser_proxy = None
    if cfg.proxy_only is not None:
        fabric.add_host(NETPROXY_HOST, (NETPROXY_ADDR,))
        fabric.add_dns_record(NETPROXY_HOST, NETPROXY_ADDR)
        fabric.add_service(NETPROXY_HOST, cfg.proxy_only[0], cfg.proxy_only[1],
                           _netproxy_handler(fabric))
        browser_proxy = cfg.proxy_only

    victim_browser = Browser(fabric, VICTIM_HOST, proxy=browser_proxy)

    server: Optional[AttackServer] = None
    mitm: Optional[MitmElement] = None
    if cfg.attack in ("applet", "mitm_js"):
        canned = CannedResponse(CANNED_QUERY, provider.build_response(CANNED_QUERY))
        if cfg.attack == "mitm_js":
            payload = list(cfg.mitm_payload) if cfg.mitm_payload else (
                attacker.default_mitm_payload(ATTACK_HOST))
            mitm = MitmElement(fabric, ATTACK_HOST, payload)
        server = AttackServer(
            fabric, ATTACK_HOST, PROVIDER_HOST, canned,
            applet_program=list(cfg.applet_program) if cfg.applet_program else None,
            mitm=mitm)
        server.install(with_tls=cfg.attack == "mitm_js")
        if cfg.attack == "mitm_js":
            mitm.dns_hijack_install(PROVIDER_HOST)
        if cfg.attack == "applet":
            # The victim takes the bait once; the applet persists across rounds.
            victim_browser.load_page(f"http://{ATTACK_HOST}/")

    session = InteractiveSession(
        attack=cfg.attack, browser=victim_browser, provider_host=PROVIDER_HOST,
        server=server, secure=cfg.provider_secure)
    return Runtime(cfg=cfg, fabric=fabric, idx=idx, session=session,
                   server=server, mitm=mitm)


# ---- leak classification ---------------------------------------------------

def _ground_truth(runtime: Runtime) -> dict:
    ground = {"snippets": set(), "paths": set(), "images": set(), "frame_srcs": set()}
    for event in runtime.fabric.events:
        if event["event"] != "spliced":
            continue
        block = event.get("block") or {}
        ground["snippets"].update(block.get("snippets") or ())
        ground["paths"].update(block.get("paths") or ())
        ground["images"].update(block.get("images") or ())
        if block.get("frame_src"):
            ground["frame_srcs"].add(block["frame_src"])
    return ground


def _received_texts(runtime: Runtime) -> list[str]:
    texts: list[str] = []
    if runtime.server is None:
        return texts
    for entry in runtime.server.received:
        texts.append(entry.get("data", ""))
        for pair in entry.get("items", ()):
            texts.extend(str(part) for part in pair)
    return texts


def _effect_values(runtime: Runtime) -> list[str]:
    return [event.get("value") or "" for event in runtime.fabric.events
            if event["event"] == "effect" and event.get("ok")]


def classify_leak(runtime: Runtime,
                  received_texts: Optional[list[str]] = None) -> tuple[LeakClass, list[str]]:
    """Match attacker-received data against what the blocks actually carried.

    Every reported item is verified twice: against the scenario's ground truth
    (corpus bodies and paths, block metadata) and against the recorded effect
    outcomes, so a leak can only be reported when some permitted read chain
    produced it.
    """
    ground = _ground_truth(runtime)
    texts = received_texts if received_texts is not None else _received_texts(runtime)
    effects = _effect_values(runtime)
    bodies = [body for _, body in runtime.cfg.corpus]
    paths = {path for path, _ in runtime.cfg.corpus}

    def seen(item: str) -> bool:
        return any(item in text for text in texts)

    def sound(item: str) -> bool:
        escaped = pagemodel.escape_text(item)
        return any(item in value or escaped in value for value in effects)

    found: dict[LeakClass, list[str]] = {}
    for snippet in sorted(ground["snippets"]):
        if seen(snippet):
            if not any(snippet in body for body in bodies):
                raise InvariantViolation(f"leaked snippet not from corpus: {snippet!r}")
            if not sound(snippet):
                raise InvariantViolation(f"leak without permitting effect: {snippet!r}")
            found.setdefault(LeakClass.SNIPPETS, []).append(snippet)
    for path in sorted(ground["paths"]):
        if seen(path):
            if path not in paths:
                raise InvariantViolation(f"leaked path not from corpus: {path!r}")
            if not sound(path):
                raise InvariantViolation(f"leak without permitting effect: {path!r}")
            found.setdefault(LeakClass.FILENAMES, []).append(path)
    for name in sorted(ground["images"]):
        if seen(name):
            if not sound(name):
                raise InvariantViolation(f"leak without permitting effect: {name!r}")
            found.setdefault(LeakClass.IMAGE_NAMES, []).append(name)
    for src in sorted(ground["frame_srcs"]):
        if seen(src):
            if not sound(src):
                raise InvariantViolation(f"leak without permitting effect: {src!r}")
            found.setdefault(LeakClass.FRAME_SRC_ONLY, []).append(src)
    if not found:
        return LeakClass.NONE, []
    top = max(found)
    items: list[str] = []
    for klass in sorted(found, reverse=True):
        items.extend(found[klass])
    return top, items


# ---- transcript invariants ---------------------------------------------------

def check_transcript(events: list[dict]) -> None:
    """Structural guarantees every run must satisfy; raises on violation."""
    loopback_streams = set()
    connect_request_sha: dict[int, str] = {}
    for event in events:
        kind = event["event"]
        if kind == "connect":
            if event.get("dst_addr") == LOOPBACK:
                loopback_streams.add(event.get("stream"))
            if event.get("secure") and "request" in event:
                raise InvariantViolation(
                    f"secure stream {event.get('stream')} logged request bytes")
            connect_request_sha[event.get("stream")] = event.get("request_sha", "")
        elif kind in ("classified", "spliced"):
            if event.get("stream") in loopback_streams:
                raise InvariantViolation(
                    f"loopback stream {event.get('stream')} went through the interceptor")
            if kind == "spliced":
                before = event.get("segments_before", 0)
                want = 2 if before >= 2 else before
                if event.get("insert_index") != want:
                    raise InvariantViolation(
                        f"block inserted at {event.get('insert_index')} "
                        f"with {before} segments (want {want})")
        elif kind == "deliver":
            stream = event.get("stream")
            if stream in connect_request_sha:
                if event.get("request_sha") != connect_request_sha[stream]:
                    raise InvariantViolation(
                        f"request bytes of stream {stream} changed in flight")


def request_purity_violations(events: list[dict],
                              corpus: tuple[tuple[str, str], ...],
                              window: int = 12) -> list[str]:
    """Corpus-derived bytes inside trusted outbound requests, beyond the typed query.

    Attacker-authored requests (applet and script actors) are the attack's own
    exfiltration channel and are accounted by the leak ladder instead.
    """
    violations: list[str] = []
    for event in events:
        if event["event"] != "connect" or "request" not in event:
            continue
        actor = event.get("actor", "")
        if not actor.startswith(_ACTOR_TRUSTED_PREFIXES):
            continue
        request = event["request"]
        query_text = ""
        for chunk in request.split("q=")[1:]:
            from urllib.parse import unquote_plus
            query_text += " " + unquote_plus(chunk.split(" ")[0].split("&")[0])
        for path, body in corpus:
            if path in request:
                violations.append(f"stream {event.get('stream')}: corpus path {path!r}")
            for start in range(0, max(len(body) - window, 0) + 1):
                piece = body[start:start + window]
                if piece in request and piece not in query_text:
                    violations.append(
                        f"stream {event.get('stream')}: corpus bytes {piece!r}")
                    break
    return violations


# ---- scenario and matrix entry points -----------------------------------------

def run_scenario(cfg: ScenarioConfig) -> tuple[LeakReport, Runtime]:
    runtime = build_runtime(cfg)
    for terms in cfg.query_script:
        runtime.session.submit(list(terms))
    leak_class, leaked_items = classify_leak(runtime)
    check_transcript(runtime.fabric.events)
    report = LeakReport(
        scenario_id=cfg.scenario_id(),
        attack=cfg.attack,
        mitigation=scenario_label(cfg),
        leak_class=leak_class,
        leaked_items=leaked_items,
        transcript_digest=runtime.fabric.transcript_digest(),
    )
    logger.debug("scenario %s -> %s", report.scenario_id, report.leak_class.label)
    return report, runtime


MATRIX_CELLS: tuple[tuple[str, dict], ...] = (
    ("applet", {"mitigation": MitigationMode.FULL}),
    ("applet", {"mitigation": MitigationMode.NO_SNIPPETS}),
    ("applet", {"mitigation": MitigationMode.IMAGES}),
    ("applet", {"mitigation": MitigationMode.IFRAME}),
    ("applet", {"mitigation": MitigationMode.OFF}),
    ("applet", {"mitigation": MitigationMode.FULL, "proxy_only": DEFAULT_PROXY_ENDPOINT}),
    ("mitm_js", {"mitigation": MitigationMode.FULL}),
    ("mitm_js", {"mitigation": MitigationMode.IFRAME}),
    ("mitm_js", {"mitigation": MitigationMode.FULL, "proxy_only": DEFAULT_PROXY_ENDPOINT}),
    ("mitm_js", {"mitigation": MitigationMode.FULL, "provider_secure": True}),
)

ORACLE: dict[tuple[str, str], LeakClass] = {
    ("applet", "full"): LeakClass.SNIPPETS,
    ("applet", "no_snippets"): LeakClass.FILENAMES,
    ("applet", "images"): LeakClass.IMAGE_NAMES,
    ("applet", "iframe"): LeakClass.FRAME_SRC_ONLY,
    ("applet", "off"): LeakClass.NONE,
    ("applet", "proxy_only"): LeakClass.NONE,
    ("mitm_js", "full"): LeakClass.SNIPPETS,
    ("mitm_js", "iframe"): LeakClass.FRAME_SRC_ONLY,
    ("mitm_js", "proxy_only"): LeakClass.SNIPPETS,
    ("mitm_js", "provider_secure"): LeakClass.NONE,
}


@dataclass
class MatrixCell:
    attack: str
    mitigation: str
    leak_class: LeakClass
    expected: LeakClass
    transcript_digest: str
    leaked_items: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.leak_class == self.expected

    def to_dict(self) -> dict:
        return {
            "attack": self.attack,
            "mitigation": self.mitigation,
            "leak_class": self.leak_class.label,
            "expected": self.expected.label,
            "ok": self.ok,
            "leaked_items": list(self.leaked_items),
            "transcript_digest": self.transcript_digest,
        }


def matrix_config(attack: str, overrides: dict, seed: int = 0,
                  corpus: Optional[tuple[tuple[str, str], ...]] = None) -> ScenarioConfig:
    return ScenarioConfig(
        seed=seed,
        attack=attack,
        mitigation=overrides.get("mitigation", MitigationMode.FULL),
        proxy_only=overrides.get("proxy_only"),
        provider_secure=overrides.get("provider_secure", False),
        corpus=corpus if corpus is not None else FIXTURE_CORPUS,
    )


def attack_matrix(seed: int = 0,
                  corpus: Optional[tuple[tuple[str, str], ...]] = None,
                  keep_runtimes: bool = False) -> list[MatrixCell] | tuple[list[MatrixCell], list[Runtime]]:
    """Run every attack-by-mitigation cell and compare against the oracle."""
    cells: list[MatrixCell] = []
    runtimes: list[Runtime] = []
    for attack_name, overrides in MATRIX_CELLS:
        cfg = matrix_config(attack_name, overrides, seed=seed, corpus=corpus)
        report, runtime = run_scenario(cfg)
        cells.append(MatrixCell(
            attack=attack_name,
            mitigation=report.mitigation,
            leak_class=report.leak_class,
            expected=ORACLE[(attack_name, report.mitigation)],
            transcript_digest=report.transcript_digest,
            leaked_items=report.leaked_items,
        ))
        runtimes.append(runtime)
    if keep_runtimes:
        return cells, runtimes
    return cells
