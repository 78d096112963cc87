"""Word-level tokenization, inverted index, and Okapi BM25 scoring."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

from .errors import DuplicateChunkId

if TYPE_CHECKING:  # pragma: no cover
    from .docmodel import Chunk

_TOKEN_RE = re.compile(r"[a-z0-9]+")

INDEX_FORMAT_VERSION = 1


def tokenize(text: str) -> list[str]:
    """Lowercase ASCII-alphanumeric runs; no stemming, numerics kept."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_len: dict[str, int] = field(default_factory=dict)
    n_docs: int = 0
    avg_len: float = 0.0


def build(chunks: Iterable["Chunk"]) -> InvertedIndex:
    """Build the inverted index; rebuilds from equal input are identical."""
    index = InvertedIndex()
    tf_by_term: dict[str, dict[str, int]] = {}
    for chunk in chunks:
        if chunk.chunk_id in index.doc_len:
            raise DuplicateChunkId(chunk.chunk_id)
        tokens = tokenize(chunk.text)
        index.doc_len[chunk.chunk_id] = len(tokens)
        for term, tf in Counter(tokens).items():
            tf_by_term.setdefault(term, {})[chunk.chunk_id] = tf
    index.n_docs = len(index.doc_len)
    index.avg_len = sum(index.doc_len.values()) / index.n_docs if index.n_docs else 0.0
    index.postings = {
        term: sorted(per_doc.items()) for term, per_doc in sorted(tf_by_term.items())
    }
    return index


def idf(term: str, index: InvertedIndex) -> float:
    """ln(1 + (N - df + 0.5) / (df + 0.5)); unseen terms use df = 0."""
    df = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))


def search(
    query_tokens: list[str],
    k: int,
    index: InvertedIndex,
    params: Bm25Params = Bm25Params(),
) -> list[tuple[str, float]]:
    """Okapi BM25 top-k; ties broken by ascending chunk id, zero scores omitted."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores: dict[str, float] = {}
    for term in query_tokens:
        plist = index.postings.get(term)
        if not plist:
            continue
        term_idf = idf(term, index)
        for chunk_id, tf in plist:
            length_norm = params.k1 * (
                1.0 - params.b + params.b * index.doc_len[chunk_id] / (index.avg_len or 1.0)
            )
            scores[chunk_id] = scores.get(chunk_id, 0.0) + term_idf * tf * (
                params.k1 + 1.0
            ) / (tf + length_norm)
    ranked = sorted(
        ((cid, s) for cid, s in scores.items() if s > 0.0), key=lambda x: (-x[1], x[0])
    )
    return ranked[:k]


def save_index(index: InvertedIndex, path: str | Path) -> None:
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "n_docs": index.n_docs,
        "avg_len": index.avg_len,
        "doc_len": index.doc_len,
        "postings": {t: [[cid, tf] for cid, tf in pl] for t, pl in index.postings.items()},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), "utf-8")


def load_index(path: str | Path) -> InvertedIndex:
    payload = json.loads(Path(path).read_text("utf-8"))
    return InvertedIndex(
        postings={t: [(cid, tf) for cid, tf in pl] for t, pl in payload["postings"].items()},
        doc_len=payload["doc_len"],
        n_docs=payload["n_docs"],
        avg_len=payload["avg_len"],
    )
