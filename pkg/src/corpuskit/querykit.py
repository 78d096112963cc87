"""Query preprocessing: cleaning, optional rewriting, condition parsing, and
keyword extraction into a composite query."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import EmptyQuery, RewriterUnavailable
from .extraction import _NUMBER_RE, _match_unit
from .lexicon import DEFAULT_SYNONYMS, STOPWORDS
from .lexindex import tokenize
from .valindex import Condition, make_condition
from .vecindex import EmbedderSpec, embed_text

logger = logging.getLogger(__name__)

_CONTROL_RE = re.compile(r"[\x00-\x1f\x7f]")
_WS_RE = re.compile(r"\s+")
_COMPARATORS = (("<=", "LE"), (">=", "GE"), ("<", "LT"), (">", "GT"), ("==", "EQ"), ("=", "EQ"))


@dataclass(eq=False)
class CompositeQuery:
    raw: str
    cleaned: str
    rewritten: str
    keywords: list[str]
    conditions: list[Condition]
    embedding: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self) -> dict:
        return {
            "raw": self.raw,
            "cleaned": self.cleaned,
            "rewritten": self.rewritten,
            "keywords": list(self.keywords),
            "conditions": [c.to_dict() for c in self.conditions],
        }


class Rewriter(Protocol):
    def rewrite(self, text: str) -> str: ...


class IdentityRewriter:
    def rewrite(self, text: str) -> str:
        return text


class LLMRewriter:
    """Query clarification through an external LLM provider."""

    def __init__(self, provider):
        self.provider = provider

    def rewrite(self, text: str) -> str:
        try:
            request = (
                "Rewrite the retrieval query below for clarity. Keep every "
                "number, unit, and comparison operator unchanged. Answer with "
                "the rewritten query only.\n\nQuery: " + text
            )
            return self.provider.complete([("user", request)]).strip() or text
        except Exception as exc:
            raise RewriterUnavailable(f"rewriter failed: {exc}") from exc


def clean_query(raw: str) -> str:
    """Trim, collapse whitespace, strip control characters; preserves case."""
    cleaned = _WS_RE.sub(" ", _CONTROL_RE.sub(" ", raw)).strip()
    if not cleaned:
        raise EmptyQuery("query is empty after cleaning")
    return cleaned


def _attribute_pattern(synonyms: dict[str, str]) -> re.Pattern:
    surfaces = set(synonyms) | {name.replace("_", " ") for name in synonyms.values()}
    ordered = sorted(surfaces, key=len, reverse=True)
    alternation = "|".join(re.escape(s) for s in ordered)
    return re.compile(rf"(?<![A-Za-z0-9])(?:{alternation})(?![A-Za-z0-9])", re.IGNORECASE)


_DEFAULT_ATTR_RE = _attribute_pattern(DEFAULT_SYNONYMS)

_BETWEEN_RE = re.compile(r"between\b", re.IGNORECASE)
_AND_RE = re.compile(r"\s*and\b", re.IGNORECASE)


def _read_number(text: str, pos: int) -> tuple[float, int] | None:
    while pos < len(text) and text[pos] in " \t":
        pos += 1
    m = _NUMBER_RE.match(text, pos)
    if m is None or ":" in m.group("num"):
        return None
    value = float(m.group("num").replace(",", ""))
    if m.group("neg"):
        value = -value
    return value, m.end()


def _read_unit(text: str, pos: int) -> tuple[str, int]:
    hit = _match_unit(text, pos)
    if hit is None:
        return "", pos
    return hit


def parse_conditions(
    cleaned: str, synonyms: dict[str, str] | None = None
) -> tuple[list[Condition], str]:
    """Parse ``<attr> (<|<=|=|>=|>)? <number> <unit>?`` and
    ``<attr> between <a> and <b> <unit>`` predicates out of the query.

    Matched spans are removed from the residual; anything unparseable stays.
    """
    attr_re = _DEFAULT_ATTR_RE if synonyms is None else _attribute_pattern(synonyms)
    conditions: list[Condition] = []
    spans: list[tuple[int, int]] = []
    scan = 0
    while True:
        m = attr_re.search(cleaned, scan)
        if m is None:
            break
        scan = m.end()
        parsed = _parse_after_attribute(cleaned, m.group(0), m.end(), synonyms)
        if parsed is None:
            continue
        cond, end = parsed
        conditions.append(cond)
        spans.append((m.start(), end))
        scan = end

    residual_parts = []
    last = 0
    for start, end in spans:
        residual_parts.append(cleaned[last:start])
        last = end
    residual_parts.append(cleaned[last:])
    residual = _WS_RE.sub(" ", " ".join(residual_parts)).strip()
    return conditions, residual


def _parse_after_attribute(
    text: str, surface: str, pos: int, synonyms: dict[str, str] | None
) -> tuple[Condition, int] | None:
    n = len(text)
    cursor = pos
    while cursor < n and text[cursor] in " \t":
        cursor += 1

    between = _BETWEEN_RE.match(text, cursor)
    if between is not None:
        first = _read_number(text, between.end())
        if first is not None:
            value_a, cursor = first
            unit_a, cursor = _read_unit(text, cursor)
            and_m = _AND_RE.match(text, cursor)
            if and_m is not None:
                second = _read_number(text, and_m.end())
                if second is not None:
                    value_b, cursor = second
                    unit_b, cursor = _read_unit(text, cursor)
                    cond = make_condition(
                        surface, "BETWEEN", value_a, unit_b or unit_a, value_b, synonyms
                    )
                    return cond, cursor
        return None

    # bare "<attr> <number>" (no comparator symbol) reads as equality
    comparator = "EQ"
    for symbol, name in _COMPARATORS:
        if text.startswith(symbol, cursor):
            comparator = name
            cursor += len(symbol)
            break
    hit = _read_number(text, cursor)
    if hit is None:
        return None
    value, cursor = hit
    unit, cursor = _read_unit(text, cursor)
    cond = make_condition(surface, comparator, value, unit, synonyms=synonyms)
    return cond, cursor


def extract_keywords(residual: str, stopwords: frozenset[str] = STOPWORDS) -> list[str]:
    """Tokenize, drop stopwords, dedupe preserving first occurrence."""
    seen: set[str] = set()
    keywords: list[str] = []
    for token in tokenize(residual):
        if token in stopwords or token in seen:
            continue
        seen.add(token)
        keywords.append(token)
    return keywords


def preprocess(
    raw: str,
    rewriter: Rewriter | None = None,
    embedder: EmbedderSpec = EmbedderSpec(),
    synonyms: dict[str, str] | None = None,
) -> CompositeQuery:
    """clean -> rewrite -> parse conditions -> extract keywords -> embed.

    A failing external rewriter falls back to identity with a warning.
    """
    cleaned = clean_query(raw)
    rewritten = cleaned
    if rewriter is not None:
        try:
            rewritten = clean_query(rewriter.rewrite(cleaned))
        except RewriterUnavailable as exc:
            logger.warning("rewriter unavailable, using cleaned query: %s", exc)
            rewritten = cleaned
    conditions, residual = parse_conditions(rewritten, synonyms)
    keywords = extract_keywords(residual)
    return CompositeQuery(
        raw=raw,
        cleaned=cleaned,
        rewritten=rewritten,
        keywords=keywords,
        conditions=conditions,
        embedding=embed_text(rewritten, embedder),
    )
