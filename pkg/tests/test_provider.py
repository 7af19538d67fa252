"""Web search provider: deterministic pages and the customization sanitizer."""

from __future__ import annotations

import pytest

from snipleak import pagemodel as pm
from snipleak import provider


def test_page_bytes_are_deterministic():
    one = provider.build_response("sports scores")
    two = provider.build_response("sports scores")
    assert one == two
    assert one != provider.build_response("other query")


def test_fake_results_are_query_keyed():
    rows = provider.fake_results("bank")
    assert len(rows) == provider.RESULT_COUNT
    assert rows == provider.fake_results("bank")
    assert rows != provider.fake_results("banks")


def test_page_parses_strictly_and_reflects_query():
    page = provider.handle_web_search("tomato soup")
    text = pm.subtree_text(page)
    assert "results for tomato soup" in text
    data = pm.serialize(page)
    assert pm.serialize(pm.parse_page(data)) == data


def test_pad_spans_every_early_split_point():
    """The block is always inserted at response byte 2920 (after segment two).

    The pad is the first body child, ahead of anything query- or
    customization-sized, so that offset lands inside one long text node for
    every input: splicing never tears a tag apart.
    """
    splice_offset = 2 * 1460
    spans = set()
    for query in ("a", "a much longer query with many words in it"):
        for custom in ("", "<b>styled</b>" * 40):
            data = provider.build_response(query, custom)
            assert len(data) > provider.PAD_END > splice_offset
            pad_start = data.index(b'<div class="w-pad">') + len(b'<div class="w-pad">')
            pad_close = data.index(b"</div>", pad_start)
            assert pad_start < splice_offset < pad_close
            pad = data[pad_start:pad_close]
            assert b"<" not in pad and b">" not in pad
            spans.add((pad_start, pad_close))
    # input length cannot move the pad: identical span for every case above
    assert len(spans) == 1


from xss_vectors import ACTIVE_MARKERS, XSS_VECTORS


def test_vector_corpus_is_big_enough():
    assert len(XSS_VECTORS) >= 50


@pytest.mark.parametrize("vector", XSS_VECTORS)
def test_sanitizer_neutralizes_vector(vector):
    cleaned = provider.sanitize_customization(vector)
    low = cleaned.lower()
    for marker in ACTIVE_MARKERS:
        assert marker not in low, f"{marker!r} survived in {cleaned!r}"
    # the cleaned fragment must embed into a strictly parseable page
    page = provider.handle_web_search("q", vector)
    data = pm.serialize(page)
    parsed = pm.parse_page(data)
    for _, node in pm.iter_nodes(parsed):
        assert node.kind not in (pm.NodeKind.SCRIPT, pm.NodeKind.APPLET, pm.NodeKind.FRAME)
        for key, value in node.attrs.items():
            assert not key.startswith("on")
            assert "javascript:" not in value.lower().replace(" ", "")


@pytest.mark.parametrize("vector", XSS_VECTORS)
def test_sanitizer_is_idempotent(vector):
    once = provider.sanitize_customization(vector)
    assert provider.sanitize_customization(once) == once


def test_sanitizer_keeps_benign_content():
    assert provider.sanitize_customization("plain text only") == "plain text only"
    cleaned = provider.sanitize_customization("<b>bold</b> rest")
    assert "<b>" in cleaned and "bold" in cleaned
    cleaned = provider.sanitize_customization('<a href="http://ok.test/p">go</a>')
    assert 'href="http://ok.test/p"' in cleaned
    # unknown tags unwrap but keep their children
    cleaned = provider.sanitize_customization("<blink>hi</blink>")
    assert "hi" in cleaned and "blink" not in cleaned


def test_sanitizer_drops_unsafe_image_names():
    cleaned = provider.sanitize_customization('<img name="ok-1.png">')
    assert 'name="ok-1.png"' in cleaned
    cleaned = provider.sanitize_customization('<img name="bad name<>">')
    assert "bad name" not in cleaned


def test_service_handler_direct_and_absolute_targets():
    ok = provider.service_handler(
        b"GET /search?q=alpha HTTP/1.0\r\nHost: websearch.test\r\n\r\n", None)
    assert ok.startswith(b"HTTP/1.0 200")
    absolute = provider.service_handler(
        b"GET http://websearch.test/search?q=alpha HTTP/1.0\r\n\r\n", None)
    assert absolute == ok
    bad = provider.service_handler(b"POST /search?q=a HTTP/1.0\r\n\r\n", None)
    assert bad.startswith(b"HTTP/1.0 400")


def test_customization_round_trips_through_the_query_string():
    raw = (b"GET /search?q=alpha&c=%3Cb%3Ecustom%3C%2Fb%3E HTTP/1.0\r\n"
           b"Host: websearch.test\r\n\r\n")
    data = provider.service_handler(raw, None)
    assert b"custom" in data
    page = pm.parse_page(data.split(b"\r\n\r\n", 1)[1])
    bolds = [n for _, n in pm.iter_nodes(page) if n.tag == "b"]
    assert any(pm.subtree_text(b) == "custom" for b in bolds)
