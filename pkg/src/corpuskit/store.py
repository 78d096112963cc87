"""Heterogeneous persistence keyed by article_id: articles, chunks, entities,
KG nodes/edges, corpus statistics, and integrity checking.

Layout: one directory holding ``manifest.json`` plus one JSONL file per
record family (``articles``, ``chunks``, ``entities``, ``kg_nodes``,
``kg_edges``), one UTF-8 JSON record per line. Writes replace whole files
through atomic renames; readers see either the old or the new snapshot.
"""

from __future__ import annotations

import json
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import docmodel, extraction, lexindex
from .docmodel import Article, Chunk, Issue, ValidationReport
from .errors import SchemaInvalid, StorageFailure, UnknownArticle
from .extraction import BaselineExtractor, Entity, KGEdge, KGNode, build_graph

MANIFEST_VERSION = 1

_FAMILIES = ("articles", "chunks", "entities", "kg_nodes", "kg_edges")

INDEX_NAMES = ("lexical", "vector", "value")

DEFAULT_BINS = {"tokens": 50, "sentences": 10, "quantities": 5}


@dataclass
class CorpusStats:
    by_category: dict[str, dict[str, int]]
    totals: dict[str, int]
    histograms: dict[str, dict[int, int]]
    article_count: int

    def to_dict(self) -> dict:
        return {
            "by_category": self.by_category,
            "totals": self.totals,
            "histograms": {
                measure: {str(b): c for b, c in sorted(bins.items())}
                for measure, bins in self.histograms.items()
            },
            "article_count": self.article_count,
        }


class Store:
    """Single-writer, multi-reader article store over a directory."""

    def __init__(self, path: str | Path, extractor=None):
        self.path = Path(path)
        self.extractor = extractor or BaselineExtractor()
        self._lock = threading.RLock()
        self._articles: dict[str, Article] = {}
        self._chunks: dict[str, list[Chunk]] = {}
        self._entities: dict[str, list[Entity]] = {}
        self._nodes: list[KGNode] = []
        self._edges: list[KGEdge] = []
        self._staleness: dict[str, bool] = {name: True for name in INDEX_NAMES}
        if (self.path / "manifest.json").exists():
            self._load()

    # -- reads ------------------------------------------------------------

    def article_ids(self) -> list[str]:
        return sorted(self._articles)

    def get_article(self, article_id: str) -> Article:
        if article_id not in self._articles:
            raise UnknownArticle(article_id)
        return self._articles[article_id]

    def get_chunks(self, article_id: str, category_filter: str | None = None) -> list[Chunk]:
        if article_id not in self._articles:
            raise UnknownArticle(article_id)
        chunks = self._chunks.get(article_id, [])
        if category_filter is None:
            return list(chunks)
        return [c for c in chunks if c.category == category_filter]

    def all_chunks(self) -> list[Chunk]:
        return [c for aid in sorted(self._chunks) for c in self._chunks[aid]]

    def chunks_by_id(self) -> dict[str, Chunk]:
        return {c.chunk_id: c for c in self.all_chunks()}

    def all_entities(self) -> list[Entity]:
        return [e for aid in sorted(self._entities) for e in self._entities[aid]]

    def graph(self) -> tuple[list[KGNode], list[KGEdge]]:
        return list(self._nodes), list(self._edges)

    def index_staleness(self) -> dict[str, bool]:
        return dict(self._staleness)

    @property
    def manifest_path(self) -> Path:
        return self.path / "manifest.json"

    # -- writes -----------------------------------------------------------

    def upsert_article(self, article: Article, entities: list[Entity] | None = None) -> str:
        """Atomically (re)write an article with its derived chunks, entities,
        and the KG layer; marks every index stale.

        ``entities`` overrides the baseline extraction with externally
        produced records (their provenance flag is preserved).
        """
        report = docmodel.validate_schema(article)
        if not report.ok:
            raise SchemaInvalid(
                "; ".join(f"{i.location}: {i.code}" for i in report.errors)
            )
        article_id = article.meta.article_id
        chunks = docmodel.chunk_article(article)
        if entities is None:
            entities = [e for chunk in chunks for e in self.extractor.extract(chunk)]
        with self._lock:
            self._articles[article_id] = article
            self._chunks[article_id] = chunks
            self._entities[article_id] = list(entities)
            self._rebuild_graph()
            self._staleness = {name: True for name in INDEX_NAMES}
            self._flush()
        return article_id

    def delete_article(self, article_id: str) -> None:
        if article_id not in self._articles:
            raise UnknownArticle(article_id)
        with self._lock:
            del self._articles[article_id]
            del self._chunks[article_id]
            del self._entities[article_id]
            self._rebuild_graph()
            self._staleness = {name: True for name in INDEX_NAMES}
            self._flush()

    def mark_indexes_fresh(self, names: tuple[str, ...] = INDEX_NAMES) -> None:
        with self._lock:
            for name in names:
                self._staleness[name] = False
            self._write_manifest()

    def _rebuild_graph(self) -> None:
        chunks = self.all_chunks()
        entities = self.all_entities()
        self._nodes, self._edges = build_graph(chunks, entities)

    # -- integrity and statistics -----------------------------------------

    def integrity_check(self) -> ValidationReport:
        """Verify referential integrity, id shapes, and manifest counts."""
        report = ValidationReport()
        chunk_ids = set()
        for aid, chunks in self._chunks.items():
            for c in chunks:
                if c.chunk_id in chunk_ids:
                    report.errors.append(
                        Issue(c.chunk_id, "DuplicateChunkId", "chunk id repeated")
                    )
                chunk_ids.add(c.chunk_id)
                try:
                    parsed_aid, category, order = docmodel.parse_chunk_id(c.chunk_id)
                    if parsed_aid != c.article_id or category != c.category:
                        report.errors.append(
                            Issue(c.chunk_id, "BadChunkId", "id fields do not match record")
                        )
                except ValueError:
                    report.errors.append(Issue(c.chunk_id, "BadChunkId", "id does not parse"))
                if c.article_id != aid or aid not in self._articles:
                    report.errors.append(
                        Issue(c.chunk_id, "DanglingChunk", "chunk references missing article")
                    )
        for entities in self._entities.values():
            for e in entities:
                if e.chunk_id not in chunk_ids:
                    report.errors.append(
                        Issue(
                            e.entity_id,
                            "DanglingEntity",
                            f"entity references unknown chunk {e.chunk_id}",
                        )
                    )
        node_ids = {n.node_id for n in self._nodes}
        if len(node_ids) != len(self._nodes):
            report.errors.append(Issue("kg_nodes", "DuplicateNodeId", "node ids not unique"))
        if node_ids and sorted(node_ids) != list(range(len(node_ids))):
            report.errors.append(Issue("kg_nodes", "SparseNodeIds", "node ids not dense"))
        for edge in self._edges:
            if edge.source not in node_ids or edge.target not in node_ids:
                report.errors.append(
                    Issue(f"{edge.source}->{edge.target}", "DanglingEdge", "edge endpoint missing")
                )
            elif edge.source == edge.target:
                report.errors.append(
                    Issue(f"{edge.source}->{edge.target}", "SelfLoop", "self-loop edge")
                )
        manifest = self._manifest_dict()
        if self.manifest_path.exists():
            stored = json.loads(self.manifest_path.read_text("utf-8"))
            for key in ("article_count", "chunk_count", "entity_count"):
                if stored.get(key) != manifest[key]:
                    report.errors.append(
                        Issue("manifest", "CountMismatch", f"{key} disagrees with records")
                    )
        return report

    def corpus_stats(self, bins: dict[str, int] | None = None) -> CorpusStats:
        """Exact token/sentence/quantity totals per category plus per-document
        histograms (bin width per measure, lower-bound keyed)."""
        widths = dict(DEFAULT_BINS)
        if bins:
            widths.update(bins)
        by_category: dict[str, dict[str, int]] = {}
        totals = {"tokens": 0, "sentences": 0, "quantities": 0}
        per_doc: dict[str, Counter] = {m: Counter() for m in totals}
        for aid in sorted(self._chunks):
            doc_totals = {"tokens": 0, "sentences": 0, "quantities": 0}
            for c in self._chunks[aid]:
                cat = by_category.setdefault(
                    c.category, {"tokens": 0, "sentences": 0, "quantities": 0}
                )
                for measure, count in (
                    ("tokens", c.token_count),
                    ("sentences", c.sentence_count),
                    ("quantities", c.quantity_count),
                ):
                    cat[measure] += count
                    totals[measure] += count
                    doc_totals[measure] += count
            for measure, total in doc_totals.items():
                bin_start = (total // widths[measure]) * widths[measure]
                per_doc[measure][bin_start] += 1
        return CorpusStats(
            by_category=by_category,
            totals=totals,
            histograms={m: dict(c) for m, c in per_doc.items()},
            article_count=len(self._articles),
        )

    # -- persistence --------------------------------------------------------

    def _manifest_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "article_count": len(self._articles),
            "chunk_count": sum(len(c) for c in self._chunks.values()),
            "entity_count": sum(len(e) for e in self._entities.values()),
            "index_staleness": dict(self._staleness),
            "index_versions": {"lexical": 1, "vector": 1, "value": 1},
        }

    def _write_file(self, name: str, lines: list[str]) -> None:
        target = self.path / name
        tmp = self.path / (name + ".tmp")
        tmp.write_text("".join(line + "\n" for line in lines), "utf-8")
        tmp.replace(target)

    def _write_manifest(self) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        tmp = self.path / "manifest.json.tmp"
        tmp.write_text(json.dumps(self._manifest_dict(), indent=2, sort_keys=True), "utf-8")
        tmp.replace(self.manifest_path)

    def _flush(self) -> None:
        try:
            self.path.mkdir(parents=True, exist_ok=True)
            self._write_file(
                "articles.jsonl",
                [
                    json.dumps(docmodel.article_to_dict(self._articles[aid]), sort_keys=True)
                    for aid in sorted(self._articles)
                ],
            )
            self._write_file(
                "chunks.jsonl",
                [json.dumps(c.to_dict(), sort_keys=True) for c in self.all_chunks()],
            )
            self._write_file(
                "entities.jsonl",
                [json.dumps(e.to_dict(), sort_keys=True) for e in self.all_entities()],
            )
            self._write_file(
                "kg_nodes.jsonl",
                [json.dumps(n.to_dict(), sort_keys=True) for n in self._nodes],
            )
            self._write_file(
                "kg_edges.jsonl",
                [json.dumps(e.to_dict(), sort_keys=True) for e in self._edges],
            )
            self._write_manifest()
        except OSError as exc:
            raise StorageFailure(f"cannot write store at {self.path}: {exc}") from exc

    def _read_lines(self, name: str) -> list[dict]:
        target = self.path / name
        if not target.exists():
            return []
        records = []
        for line in target.read_text("utf-8").splitlines():
            if line.strip():
                records.append(json.loads(line))
        return records

    def _load(self) -> None:
        try:
            manifest = json.loads(self.manifest_path.read_text("utf-8"))
        except (OSError, ValueError) as exc:
            raise StorageFailure(f"cannot read manifest at {self.path}: {exc}") from exc
        self._staleness = {
            name: bool(manifest.get("index_staleness", {}).get(name, True))
            for name in INDEX_NAMES
        }
        self._articles = {}
        self._chunks = {}
        self._entities = {}
        for record in self._read_lines("articles.jsonl"):
            article = docmodel.article_from_dict(record)
            self._articles[article.meta.article_id] = article
            self._chunks[article.meta.article_id] = []
            self._entities[article.meta.article_id] = []
        for record in self._read_lines("chunks.jsonl"):
            chunk = Chunk.from_dict(record)
            self._chunks.setdefault(chunk.article_id, []).append(chunk)
        for record in self._read_lines("entities.jsonl"):
            entity = Entity.from_dict(record)
            aid = entity.chunk_id.partition("#")[0]
            self._entities.setdefault(aid, []).append(entity)
        self._nodes = [KGNode.from_dict(r) for r in self._read_lines("kg_nodes.jsonl")]
        self._edges = [KGEdge.from_dict(r) for r in self._read_lines("kg_edges.jsonl")]


def ingest_text(store: Store, text: str) -> str:
    """Parse, validate, and upsert one structured-article text."""
    article = docmodel.parse_article(text)
    return store.upsert_article(article)


def token_count(text: str) -> int:
    """Token counting rule shared with the lexical index."""
    return len(lexindex.tokenize(text))


def quantity_count(text: str) -> int:
    return len(extraction.extract_quantities(text))
