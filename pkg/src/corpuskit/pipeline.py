"""End-to-end plumbing shared by the CLI and the HTTP server: index
building/loading, retrieval, ask, and the canonical JSON payload shapes."""

from __future__ import annotations

from pathlib import Path

from . import lexindex, ragkit, valindex, vecindex
from .config import AppConfig
from .errors import StaleIndex
from .fusion import IndexBundle, RetrievalResult, retrieve
from .querykit import CompositeQuery, parse_conditions, preprocess
from .store import Store

LEXICAL_FILE = "index_lexical.json"
VECTOR_FILE = "index_vectors.json"
VALUE_FILE = "index_values.json"


def build_indexes(store: Store, config: AppConfig) -> IndexBundle:
    """Build all three indexes from the store, persist them under the store
    directory, and clear the staleness flags."""
    chunks = store.all_chunks()
    lexical = lexindex.build(chunks)
    vector = vecindex.build(chunks, config.embedder)
    value = valindex.index_entities(
        store.all_entities(), known_chunk_ids={c.chunk_id for c in chunks}
    )
    lexindex.save_index(lexical, store.path / LEXICAL_FILE)
    vecindex.save_index(vector, store.path / VECTOR_FILE)
    valindex.save_index(value, store.path / VALUE_FILE)
    store.mark_indexes_fresh()
    return IndexBundle(
        lexical=lexical, vector=vector, value=value, bm25=config.bm25, stale=store.index_staleness()
    )


def load_indexes(store: Store, config: AppConfig) -> IndexBundle:
    """Load persisted indexes; raises :class:`StaleIndex` when any index is
    stale or missing."""
    staleness = store.index_staleness()
    if any(staleness.values()):
        stale = sorted(k for k, v in staleness.items() if v)
        raise StaleIndex(f"indexes stale: {', '.join(stale)}; run 'index build'")
    for name in (LEXICAL_FILE, VECTOR_FILE, VALUE_FILE):
        if not (store.path / Path(name)).exists():
            raise StaleIndex(f"missing index file {name}; run 'index build'")
    return IndexBundle(
        lexical=lexindex.load_index(store.path / LEXICAL_FILE),
        vector=vecindex.load_index(store.path / VECTOR_FILE),
        value=valindex.load_index(store.path / VALUE_FILE),
        bm25=config.bm25,
        stale=staleness,
    )


def run_query(
    store: Store,
    indexes: IndexBundle,
    config: AppConfig,
    raw_query: str,
    filter_text: str | None = None,
    rewriter=None,
) -> tuple[CompositeQuery, RetrievalResult]:
    """Composite retrieval; ``filter_text`` uses the condition grammar
    verbatim and restricts results to chunks satisfying every condition."""
    q = preprocess(raw_query, rewriter=rewriter, embedder=config.embedder)
    hard_conditions = None
    if filter_text:
        hard_conditions, _ = parse_conditions(filter_text)
        q.conditions = q.conditions + hard_conditions
    result = retrieve(
        q,
        indexes,
        store.chunks_by_id(),
        weights=config.weights,
        pool_size=config.pool_size,
        cap=config.cap,
        tau=config.tau,
        hard_conditions=hard_conditions,
    )
    return q, result


def run_ask(
    store: Store,
    indexes: IndexBundle,
    config: AppConfig,
    raw_query: str,
    filter_text: str | None = None,
    template: str | None = None,
) -> dict:
    """Full RAG: retrieve, assemble context, generate, verify grounding."""
    q, result = run_query(store, indexes, config, raw_query, filter_text)
    ctx = ragkit.assemble_context(result, config.budget)
    prompt = ragkit.build_prompt(q, ctx, template)
    answer = ragkit.generate(prompt, config.generator)
    grounding = ragkit.verify_grounding(answer, ctx)
    return ask_payload(q, result, ctx, answer, grounding)


# --------------------------------------------------------------------------
# canonical payloads (shared byte-for-byte by CLI --format json and HTTP)

def query_payload(q: CompositeQuery, result: RetrievalResult) -> dict:
    return {
        "query": q.to_dict(),
        "articles": [
            {
                "article_id": a.article_id,
                "score": a.score,
                "chunks": [
                    {
                        "chunk_id": c.scored.chunk_id,
                        "category": c.category,
                        "heading": c.heading,
                        "text": c.text,
                        "scores": {
                            "semantic": c.scored.raw_semantic,
                            "bm25": c.scored.raw_bm25,
                            "relational": c.scored.raw_relational,
                            "semantic_norm": c.scored.norm_semantic,
                            "bm25_norm": c.scored.norm_bm25,
                            "relational_norm": c.scored.norm_relational,
                            "fused": c.scored.fused,
                        },
                    }
                    for c in a.chunks
                ],
            }
            for a in result.articles
        ],
    }


def ask_payload(
    q: CompositeQuery,
    result: RetrievalResult,
    ctx: ragkit.ContextPackage,
    answer: str,
    grounding: ragkit.GroundingReport,
) -> dict:
    return {
        "query": q.to_dict(),
        "answer": answer,
        "grounding": grounding.to_dict(),
        "context": [
            {"ref": e.ref, "chunk_id": e.chunk_id, "token_count": e.token_count}
            for e in ctx.entries
        ],
        "articles": [a.article_id for a in result.articles],
    }
