"""Retrieval and extraction evaluation: hit-category classification,
substantive-match@N counts, extraction precision/recall, and weight sweeps."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .docmodel import Article, serialize_article
from .extraction import compare_quantity_sets, extract_quantities
from .fusion import RetrievalResult, Weights

QUERY_CATEGORIES = (
    "data-retrieval",
    "recommendation",
    "informational",
    "integrative-summary",
    "open-ended",
)

HIT_LABELS = ("first_hit", "substitute", "failed")

DEFAULT_HIT_N = 10


@dataclass(frozen=True)
class EvalQuery:
    query: str
    category: str
    gold_article_ids: tuple[str, ...]
    gold_chunk_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if self.category not in QUERY_CATEGORIES:
            raise ValueError(f"unknown query category {self.category!r}")
        if not self.gold_article_ids:
            raise ValueError("at least one gold article is required")

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "category": self.category,
            "gold_article_ids": list(self.gold_article_ids),
            "gold_chunk_ids": list(self.gold_chunk_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalQuery":
        return cls(
            query=d["query"],
            category=d["category"],
            gold_article_ids=tuple(d["gold_article_ids"]),
            gold_chunk_ids=tuple(d.get("gold_chunk_ids", ())),
        )


@dataclass
class HitReport:
    labels: list[str] = field(default_factory=list)

    @property
    def rates(self) -> dict[str, float]:
        n = len(self.labels)
        if n == 0:
            return {label: 0.0 for label in HIT_LABELS}
        return {label: self.labels.count(label) / n for label in HIT_LABELS}

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "rates": self.rates, "count": len(self.labels)}


def classify_hits(
    result: RetrievalResult, gold_article_ids: Iterable[str], n: int = DEFAULT_HIT_N
) -> str:
    """first_hit: a gold article at rank 1; substitute: within ranks 2..N;
    failed otherwise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gold = set(gold_article_ids)
    ranked = [a.article_id for a in result.articles]
    if ranked and ranked[0] in gold:
        return "first_hit"
    if any(aid in gold for aid in ranked[1:n]):
        return "substitute"
    return "failed"


def substantive_matches(
    result: RetrievalResult, gold_chunk_ids: Iterable[str], n_list: list[int]
) -> dict[int, int]:
    """Gold chunks among the top-N fused pool chunks, per N (nondecreasing)."""
    if sorted(n_list) != list(n_list):
        raise ValueError("n_list must be ascending")
    gold = set(gold_chunk_ids)
    ranked = [c.chunk_id for c in result.pool]
    return {n: sum(1 for cid in ranked[:n] if cid in gold) for n in n_list}


def extraction_pr(
    source_text: str, structured: Article, rel_tol: float = 1e-9
) -> tuple[float, float]:
    """Quantity-mapping precision/recall from the source text to the
    structured article, via maximum-matching set comparison."""
    source_q = extract_quantities(source_text)
    target_q = extract_quantities(serialize_article(structured))
    report = compare_quantity_sets(source_q, target_q, rel_tol)
    return report.precision, report.recall


def evaluate_queries(
    queries: list[EvalQuery],
    search_fn: Callable[[EvalQuery], RetrievalResult],
    n: int = DEFAULT_HIT_N,
) -> tuple[HitReport, list[dict]]:
    """Run retrieval per query and classify hits; returns the aggregate
    report plus one record per query."""
    report = HitReport()
    records = []
    for eq in queries:
        result = search_fn(eq)
        label = classify_hits(result, eq.gold_article_ids, n)
        report.labels.append(label)
        records.append(
            {
                "query": eq.query,
                "category": eq.category,
                "label": label,
                "ranked_articles": [a.article_id for a in result.articles[:n]],
            }
        )
    return report, records


def weight_sweep(
    queries: list[EvalQuery],
    grid: list[Weights],
    search_fn: Callable[[EvalQuery, Weights], RetrievalResult],
    n: int = DEFAULT_HIT_N,
) -> list[dict]:
    """Evaluate the full pipeline per grid point; deterministic table of
    (weights, first_hit, substitute, failed) rates."""
    rows = []
    for weights in grid:
        report, _ = evaluate_queries(
            queries, lambda eq, w=weights: search_fn(eq, w), n
        )
        rates = report.rates
        rows.append(
            {
                "weights": [weights.w_sem, weights.w_lex, weights.w_rel],
                "first_hit_rate": rates["first_hit"],
                "substitute_rate": rates["substitute"],
                "failed_rate": rates["failed"],
            }
        )
    return rows


def load_queries(path: str | Path) -> list[EvalQuery]:
    queries = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            queries.append(EvalQuery.from_dict(json.loads(line)))
    return queries


def report_csv(rows: list[dict]) -> str:
    """CSV summary of per-query eval records."""
    lines = ["query,category,label"]
    for row in rows:
        query = row["query"].replace('"', '""')
        lines.append(f'"{query}",{row["category"]},{row["label"]}')
    return "\n".join(lines) + "\n"
