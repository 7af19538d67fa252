"""Loopback search server: destination-only acceptance and inert reflection."""

from __future__ import annotations

import random

import pytest

from snipleak import localserver as ls
from snipleak import netfabric as nf
from snipleak import pagemodel as pm
from snipleak import searchcore as sc

CFG = ls.LocalServerConfig()
IDX = sc.index_corpus([
    sc.Document("d0", "C:/docs/pw.txt", "password hunter2 kept in this file"),
    sc.Document("d1", "C:/docs/more.txt", "password reused on many sites sadly"),
    sc.Document("d2", "C:/docs/soup.txt", "tomato soup simmer with basil"),
])


def test_acceptance_is_destination_only():
    assert ls.accept_connection(CFG, "127.0.0.1", CFG.port)
    assert ls.accept_connection(CFG, "localhost", CFG.port)
    assert not ls.accept_connection(CFG, "10.0.0.2", CFG.port)
    assert not ls.accept_connection(CFG, "127.0.0.1", CFG.port + 1)


def test_forged_sources_change_nothing():
    rng = random.Random(21)
    sources = ["127.0.0.1", "localhost", "10.0.0.66", "victim-pc", "", "addr"]
    for _ in range(60):
        src = rng.choice(sources)
        host = rng.choice(sources)
        assert ls.accept_connection(CFG, "127.0.0.1", CFG.port, src, host)
        remote = f"10.0.{rng.randrange(256)}.{rng.randrange(1, 255)}"
        assert not ls.accept_connection(CFG, remote, CFG.port, src, host)


@pytest.fixture
def fabric():
    fab = nf.Fabric(seed=5)
    fab.add_host("victim-pc", ("10.0.0.2",), is_victim=True)
    fab.add_host("attack.test", ("10.0.0.66",))
    ls.install(fab, CFG, IDX)
    return fab


def request_local(fab, raw: bytes) -> bytes:
    stream = fab.connect("victim-pc", nf.LOOPBACK, CFG.port, raw, actor="browser")
    return fab.deliver(stream)


def test_local_query_served(fabric):
    data = request_local(
        fabric, b"GET /search?q=password HTTP/1.0\r\nHost: 127.0.0.1:4664\r\n\r\n")
    assert data.startswith(b"HTTP/1.0 200")
    page = pm.parse_page(data.split(b"\r\n\r\n", 1)[1])
    text = pm.subtree_text(page)
    assert "C:/docs/pw.txt" in text and "C:/docs/more.txt" in text
    assert "hunter2" in text          # full mode shows snippets locally
    assert "soup" not in text


def test_remote_destination_refused(fabric):
    with pytest.raises(nf.ConnectionRefused):
        fabric.connect("attack.test", "10.0.0.2", CFG.port,
                       b"GET /search?q=password HTTP/1.0\r\n\r\n", actor="user")


def test_attacker_loopback_is_their_own(fabric):
    # 127.0.0.1 dialed from the attacker host lands on the attacker's own
    # loopback, where nothing listens
    with pytest.raises(nf.ConnectionRefused):
        fabric.connect("attack.test", nf.LOOPBACK, CFG.port,
                       b"GET /search?q=password HTTP/1.0\r\n\r\n", actor="user")


def test_reflected_query_is_inert(fabric):
    payload = '<script>{"op":"x"}</script><img name="evil">'
    from urllib.parse import quote_plus
    raw = f"GET /search?q={quote_plus(payload)} HTTP/1.0\r\n\r\n".encode()
    data = request_local(fabric, raw)
    body = data.split(b"\r\n\r\n", 1)[1]
    page = pm.parse_page(body)         # page still parses strictly
    # the payload text appears escaped, never as markup
    kinds = {node.kind for _, node in pm.iter_nodes(page)}
    assert pm.NodeKind.SCRIPT not in kinds
    assert pm.NodeKind.IMAGE not in kinds
    assert payload in pm.subtree_text(page)
    assert b"&lt;script&gt;" in body


def test_bad_requests_get_errors(fabric):
    assert request_local(fabric, b"POST /search?q=a HTTP/1.0\r\n\r\n").startswith(
        b"HTTP/1.0 400")
    assert request_local(fabric, b"GET /other HTTP/1.0\r\n\r\n").startswith(
        b"HTTP/1.0 404")
    assert request_local(fabric, b"\xff\x00broken").startswith(b"HTTP/1.0 400")


def test_display_mode_redactions():
    no_snip = ls.LocalServerConfig(mode=sc.MitigationMode.NO_SNIPPETS)
    page = ls.results_page(no_snip, IDX, "password")
    text = pm.subtree_text(page)
    assert "C:/docs/pw.txt" in text and "hunter2" not in text
    images = ls.LocalServerConfig(mode=sc.MitigationMode.IMAGES)
    page = ls.results_page(images, IDX, "password")
    text = pm.subtree_text(page)
    assert "C:/docs" not in text and "hunter2" not in text
    # iframe and off only constrain the integrated block; locally, full results
    for mode in (sc.MitigationMode.IFRAME, sc.MitigationMode.OFF):
        page = ls.results_page(ls.LocalServerConfig(mode=mode), IDX, "password")
        assert "hunter2" in pm.subtree_text(page)


def test_iframe_page_origin_is_loopback():
    page, origin = ls.serve_iframe_page(CFG, IDX, "password")
    assert origin == pm.Origin(pm.Scheme.PLAIN, "127.0.0.1", CFG.port)
    assert "hunter2" in pm.subtree_text(page)
