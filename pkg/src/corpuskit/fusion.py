"""Composite retrieval: per-axis scoring, min-max normalization, weighted
fusion, article ranking, and content filtering."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import lexindex, valindex, vecindex
from .docmodel import Chunk, parse_chunk_id
from .errors import InvalidWeights, StaleIndex
from .querykit import CompositeQuery

DEFAULT_POOL_SIZE = 100
DEFAULT_CAP = 3
DEFAULT_TAU = 0.5

#: query keywords that prefer a category during content filtering
CATEGORY_PREFERENCES: dict[str, str] = {
    "fabricate": "Preparation",
    "synthesis": "Preparation",
    "preparation": "Preparation",
    "milling": "Preparation",
    "measure": "Characterization",
    "characterization": "Characterization",
    "conductivity": "Characterization",
    "mechanism": "Mechanism",
    "why": "Mechanism",
    "model": "Modeling",
    "simulation": "Modeling",
    "theory": "Modeling",
}


@dataclass(frozen=True)
class Weights:
    w_sem: float = 0.6
    w_lex: float = 0.3
    w_rel: float = 0.1

    def __post_init__(self):
        if min(self.w_sem, self.w_lex, self.w_rel) < 0:
            raise InvalidWeights("weights must be non-negative")
        total = self.w_sem + self.w_lex + self.w_rel
        if abs(total - 1.0) > 1e-9:
            raise InvalidWeights(f"weights must sum to 1, got {total}")


@dataclass(frozen=True)
class ScoredChunk:
    chunk_id: str
    raw_semantic: float
    raw_bm25: float
    raw_relational: float
    norm_semantic: float
    norm_bm25: float
    norm_relational: float
    fused: float


@dataclass
class ArticleRank:
    article_id: str
    score: float
    chunks: list[ScoredChunk]


@dataclass
class SelectedChunk:
    scored: ScoredChunk
    category: str
    heading: str
    text: str
    token_count: int


@dataclass
class RankedArticle:
    article_id: str
    score: float
    chunks: list[SelectedChunk]


@dataclass
class RetrievalResult:
    articles: list[RankedArticle]
    #: full fused pool ranking, for provenance and depth metrics
    pool: list[ScoredChunk] = field(default_factory=list)


@dataclass
class IndexBundle:
    lexical: lexindex.InvertedIndex
    vector: vecindex.VectorIndex
    value: valindex.ValueIndex
    bm25: lexindex.Bm25Params = lexindex.Bm25Params()
    stale: dict[str, bool] = field(default_factory=dict)


def axis_scores(
    q: CompositeQuery, indexes: IndexBundle, pool_size: int = DEFAULT_POOL_SIZE
) -> tuple[dict[str, float], dict[str, float], dict[str, float]]:
    """Raw scores per axis over the candidate pool.

    The pool is the union of the top ``pool_size`` chunks per axis plus every
    condition-matching chunk; chunks missing from an axis score 0 there.
    """
    if any(indexes.stale.values()):
        stale = sorted(k for k, v in indexes.stale.items() if v)
        raise StaleIndex(f"indexes stale: {', '.join(stale)}; rebuild first")

    semantic: dict[str, float] = {}
    if indexes.vector.chunk_ids:
        for chunk_id, dist in vecindex.knn(q.embedding, pool_size, indexes.vector):
            semantic[chunk_id] = vecindex.similarity(dist)

    lexical = dict(lexindex.search(q.keywords, pool_size, indexes.lexical, indexes.bm25)) if q.keywords else {}

    matching: set[str] = set()
    for cond in q.conditions:
        matching |= valindex.match_condition(cond, indexes.value)
    relational = {
        cid: valindex.relational_score(cid, q.conditions, indexes.value) for cid in matching
    }

    pool = set(semantic) | set(lexical) | matching
    sem_map = {cid: semantic.get(cid, 0.0) for cid in pool}
    lex_map = {cid: lexical.get(cid, 0.0) for cid in pool}
    rel_map = {cid: relational.get(cid, 0.0) for cid in pool}
    return sem_map, lex_map, rel_map


def normalize_scores(scores: dict[str, float]) -> dict[str, float]:
    """Min-max per axis; a degenerate axis maps to all 1 when its common raw
    value is positive, else to all 0."""
    if not scores:
        return {}
    lo = min(scores.values())
    hi = max(scores.values())
    if hi == lo:
        fill = 1.0 if hi > 0 else 0.0
        return {cid: fill for cid in scores}
    return {cid: (s - lo) / (hi - lo) for cid, s in scores.items()}


def fuse(
    sem: dict[str, float],
    lex: dict[str, float],
    rel: dict[str, float],
    weights: Weights = Weights(),
    raw_sem: dict[str, float] | None = None,
    raw_lex: dict[str, float] | None = None,
    raw_rel: dict[str, float] | None = None,
) -> list[ScoredChunk]:
    """Weighted sum of normalized axis scores, descending; ties broken by
    ascending chunk id. Raw maps, when given, fill provenance fields."""
    raw_sem = raw_sem or {}
    raw_lex = raw_lex or {}
    raw_rel = raw_rel or {}
    pool = set(sem) | set(lex) | set(rel)
    scored = [
        ScoredChunk(
            chunk_id=cid,
            raw_semantic=raw_sem.get(cid, 0.0),
            raw_bm25=raw_lex.get(cid, 0.0),
            raw_relational=raw_rel.get(cid, 0.0),
            norm_semantic=sem.get(cid, 0.0),
            norm_bm25=lex.get(cid, 0.0),
            norm_relational=rel.get(cid, 0.0),
            fused=weights.w_sem * sem.get(cid, 0.0)
            + weights.w_lex * lex.get(cid, 0.0)
            + weights.w_rel * rel.get(cid, 0.0),
        )
        for cid in pool
    ]
    scored.sort(key=lambda c: (-c.fused, c.chunk_id))
    return scored


def rank_articles(ranked_chunks: list[ScoredChunk]) -> list[ArticleRank]:
    """Article score = max fused chunk score; ties broken by the sum of its
    pooled chunk scores, then ascending article id."""
    by_article: dict[str, list[ScoredChunk]] = {}
    for chunk in ranked_chunks:
        article_id, _, _ = parse_chunk_id(chunk.chunk_id)
        by_article.setdefault(article_id, []).append(chunk)
    ranks = [
        ArticleRank(article_id=aid, score=max(c.fused for c in chunks), chunks=chunks)
        for aid, chunks in by_article.items()
    ]
    ranks.sort(key=lambda a: (-a.score, -sum(c.fused for c in a.chunks), a.article_id))
    return ranks


def content_filter(
    ranked: list[ArticleRank],
    q: CompositeQuery,
    chunks_by_id: dict[str, Chunk],
    cap: int = DEFAULT_CAP,
    tau: float = DEFAULT_TAU,
    pool: list[ScoredChunk] | None = None,
) -> RetrievalResult:
    """Keep, per article, chunks with fused score >= tau * global top, at most
    ``cap``, preferring categories named by the query keywords."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must be in (0, 1]")
    if not ranked:
        return RetrievalResult(articles=[], pool=pool or [])

    threshold = tau * max(a.score for a in ranked)
    preferred = {
        CATEGORY_PREFERENCES[kw] for kw in q.keywords if kw in CATEGORY_PREFERENCES
    }

    articles: list[RankedArticle] = []
    for rank in ranked:
        passing = [c for c in rank.chunks if c.fused >= threshold]
        passing.sort(
            key=lambda c: (
                chunks_by_id[c.chunk_id].category not in preferred,
                -c.fused,
                c.chunk_id,
            )
        )
        selected = []
        for c in passing[:cap]:
            chunk = chunks_by_id[c.chunk_id]
            selected.append(
                SelectedChunk(
                    scored=c,
                    category=chunk.category,
                    heading=chunk.heading,
                    text=chunk.text,
                    token_count=chunk.token_count,
                )
            )
        if selected:
            articles.append(RankedArticle(rank.article_id, rank.score, selected))
    return RetrievalResult(articles=articles, pool=pool or [])


def retrieve(
    q: CompositeQuery,
    indexes: IndexBundle,
    chunks_by_id: dict[str, Chunk],
    weights: Weights = Weights(),
    pool_size: int = DEFAULT_POOL_SIZE,
    cap: int = DEFAULT_CAP,
    tau: float = DEFAULT_TAU,
    hard_conditions: list[valindex.Condition] | None = None,
) -> RetrievalResult:
    """Full composite retrieval. ``hard_conditions`` (e.g. a CLI ``--filter``)
    restrict the pool to chunks satisfying all of them before ranking."""
    sem, lex, rel = axis_scores(q, indexes, pool_size)
    ranked_chunks = fuse(
        normalize_scores(sem),
        normalize_scores(lex),
        normalize_scores(rel),
        weights,
        raw_sem=sem,
        raw_lex=lex,
        raw_rel=rel,
    )
    if hard_conditions:
        allowed: set[str] | None = None
        for cond in hard_conditions:
            hits = valindex.match_condition(cond, indexes.value)
            allowed = hits if allowed is None else allowed & hits
        ranked_chunks = [c for c in ranked_chunks if c.chunk_id in (allowed or set())]
    return content_filter(
        rank_articles(ranked_chunks), q, chunks_by_id, cap, tau, pool=ranked_chunks
    )
