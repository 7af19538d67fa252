"""Local corpus index and the rendered result block.

Tokens are maximal ASCII alphanumeric runs, lowercased.  Queries rank
documents by total hit count with ascending-path tie-breaks, keep the top
SHOWN_RESULTS entries, and carry one bounded snippet per entry.  The module
also renders the block that gets spliced into intercepted responses, in each
of the five mitigation modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional
from urllib.parse import quote_plus

from . import pagemodel
from .pagemodel import HtmlNode

# ---- tuning constants --------------------------------------------------

SNIPPET_WINDOW = 40        # characters of context per snippet
SHOWN_RESULTS = 2          # entries rendered into the integrated block
BLOCK_MARKER = "gd-local-results"
LOCAL_SERVER_PORT = 4664
HEADER_TEMPLATE = "{count} results stored on your computer"


class MitigationMode(Enum):
    """How much of the local results the integrated block may reveal."""

    FULL = "full"
    NO_SNIPPETS = "no_snippets"
    IMAGES = "images"
    IFRAME = "iframe"
    OFF = "off"


class CorpusError(ValueError):
    """Corpus cannot be indexed (duplicate ids, empty paths)."""


class QueryError(ValueError):
    """Query is empty after normalization."""


class SnippetRangeError(ValueError):
    """Posting offset does not fit inside the document body."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    path: str
    body: str


@dataclass(frozen=True)
class Snippet:
    """Bounded context window around one term occurrence."""

    doc_path: str
    text: str
    match_term: str


@dataclass(frozen=True)
class LocalResultSet:
    query_terms: tuple[str, ...]
    total_matches: int
    entries: tuple[tuple[str, Snippet], ...]  # (doc path, snippet), ranked


@dataclass
class InvertedIndex:
    """Postings keyed by term: ordered (doc_id, offset) pairs."""

    postings: dict[str, list[tuple[str, int]]]
    documents: dict[str, Document]


def tokenize(text: str) -> Iterator[tuple[str, int]]:
    """Yield (lowercased token, offset) for maximal ASCII alphanumeric runs."""
    start: Optional[int] = None
    for i, ch in enumerate(text):
        if ("a" <= ch <= "z") or ("A" <= ch <= "Z") or ("0" <= ch <= "9"):
            if start is None:
                start = i
        elif start is not None:
            yield text[start:i].lower(), start
            start = None
    if start is not None:
        yield text[start:].lower(), start


def index_corpus(documents: Iterable[Document]) -> InvertedIndex:
    postings: dict[str, list[tuple[str, int]]] = {}
    by_id: dict[str, Document] = {}
    for doc in documents:
        if doc.doc_id in by_id:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        if not doc.path:
            raise CorpusError(f"document {doc.doc_id!r} has an empty path")
        by_id[doc.doc_id] = doc
        for term, offset in tokenize(doc.body):
            postings.setdefault(term, []).append((doc.doc_id, offset))
    for term in postings:
        postings[term].sort()
    return InvertedIndex(postings, by_id)


def normalize_terms(terms: Iterable[str]) -> list[str]:
    """Lowercase query terms, dropping duplicates and non-token input."""
    seen: list[str] = []
    for raw in terms:
        for token, _ in tokenize(raw):
            if token not in seen:
                seen.append(token)
    return seen


def extract_snippet(doc: Document, offset: int, term: str) -> Snippet:
    """SNIPPET_WINDOW characters centered on the occurrence, clamped to the body."""
    body = doc.body
    if offset < 0 or offset + len(term) > len(body):
        raise SnippetRangeError(
            f"offset {offset} with term {term!r} outside document {doc.doc_id!r}")
    if len(body) <= SNIPPET_WINDOW:
        return Snippet(doc.path, body, term)
    center = offset + len(term) // 2
    start = center - SNIPPET_WINDOW // 2
    start = max(0, min(start, len(body) - SNIPPET_WINDOW))
    return Snippet(doc.path, body[start:start + SNIPPET_WINDOW], term)


def _doc_hits(idx: InvertedIndex, terms: list[str]) -> dict[str, dict[str, list[int]]]:
    """doc_id -> term -> offsets, for documents matching at least one term."""
    hits: dict[str, dict[str, list[int]]] = {}
    for term in terms:
        for doc_id, offset in idx.postings.get(term, ()):
            hits.setdefault(doc_id, {}).setdefault(term, []).append(offset)
    return hits


def _ranked_matches(idx: InvertedIndex, terms: list[str]) -> list[tuple[str, Snippet]]:
    """(path, snippet) for every matching document, best-ranked first."""
    hits = _doc_hits(idx, terms)
    order = sorted(
        hits,
        key=lambda d: (-sum(len(offs) for offs in hits[d].values()), idx.documents[d].path),
    )
    matches: list[tuple[str, Snippet]] = []
    for doc_id in order:
        doc = idx.documents[doc_id]
        # Snippet the most frequent matched term; break ties toward the
        # earliest occurrence, then the lexicographically smaller term.
        best = min(hits[doc_id].items(), key=lambda kv: (-len(kv[1]), min(kv[1]), kv[0]))
        term, offsets = best
        matches.append((doc.path, extract_snippet(doc, min(offsets), term)))
    return matches


def query_index(idx: InvertedIndex, terms: Iterable[str]) -> LocalResultSet:
    """Rank matching documents and keep the top SHOWN_RESULTS entries."""
    raw = tuple(terms)
    normalized = normalize_terms(raw)
    if not normalized:
        raise QueryError(f"query {raw!r} holds no indexable terms")
    matches = _ranked_matches(idx, normalized)
    return LocalResultSet(
        query_terms=raw,
        total_matches=len(matches),
        entries=tuple(matches[:SHOWN_RESULTS]),
    )


def all_matches(idx: InvertedIndex, terms: Iterable[str]) -> list[tuple[str, Snippet]]:
    """Unbounded ranked match list; the local server's own page shows everything."""
    normalized = normalize_terms(terms)
    if not normalized:
        raise QueryError("query holds no indexable terms")
    return _ranked_matches(idx, normalized)


# ---- rendering ----------------------------------------------------------

def image_name(position: int) -> str:
    # Positional names only: the name must not carry document content.
    return f"gdres{position}.png"


def iframe_src(query_terms: Iterable[str], local_port: int = LOCAL_SERVER_PORT) -> str:
    return f"http://127.0.0.1:{local_port}/search?q={quote_plus(' '.join(query_terms))}"


def render_local_block(results: LocalResultSet, mode: MitigationMode,
                       local_port: int = LOCAL_SERVER_PORT) -> HtmlNode:
    """Build the node spliced into an intercepted response for this mode."""
    if mode is MitigationMode.OFF:
        return pagemodel.element("div")
    if mode is MitigationMode.IFRAME:
        return pagemodel.frame(
            iframe_src(results.query_terms, local_port),
            attrs={"data-marker": BLOCK_MARKER},
        )
    children: list[HtmlNode] = []
    if mode in (MitigationMode.FULL, MitigationMode.NO_SNIPPETS):
        header = HEADER_TEMPLATE.format(count=results.total_matches)
        children.append(pagemodel.element(
            "p", {"class": "gd-header"}, [pagemodel.text_node(header)]))
        for path, snippet in results.entries:
            entry_children = [pagemodel.element(
                "span", {"class": "gd-path"}, [pagemodel.text_node(path)])]
            if mode is MitigationMode.FULL:
                entry_children.append(pagemodel.element(
                    "span", {"class": "gd-snip"}, [pagemodel.text_node(snippet.text)]))
            children.append(pagemodel.element("p", {"class": "gd-entry"}, entry_children))
    else:  # IMAGES: opaque per-entry images, no character data at all
        for position in range(len(results.entries)):
            children.append(pagemodel.image(image_name(position)))
    return pagemodel.element(
        "div", {"class": "gd-local", "data-marker": BLOCK_MARKER}, children)


def block_items(results: LocalResultSet, mode: MitigationMode,
                local_port: int = LOCAL_SERVER_PORT) -> dict:
    """Ground-truth metadata for a rendered block, used by transcripts and leak checks."""
    items: dict = {"mode": mode.value, "paths": [], "snippets": [], "images": [], "frame_src": None}
    if mode is MitigationMode.OFF:
        return items
    if mode is MitigationMode.IFRAME:
        items["frame_src"] = iframe_src(results.query_terms, local_port)
        return items
    if mode is MitigationMode.IMAGES:
        items["images"] = [image_name(i) for i in range(len(results.entries))]
        return items
    items["paths"] = [path for path, _ in results.entries]
    if mode is MitigationMode.FULL:
        items["snippets"] = [snippet.text for _, snippet in results.entries]
    return items
