"""Attribute-value axis: entity value index, condition predicates with unit
conversion, and per-chunk relational scoring."""

from __future__ import annotations

import json
import logging
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import DanglingEntity
from .extraction import Entity, normalize_quantity
from .lexicon import DEFAULT_SYNONYMS, load_synonyms, normalize_attribute

__all__ = [
    "Condition",
    "ValueIndex",
    "index_entities",
    "match_condition",
    "relational_score",
    "DEFAULT_SYNONYMS",
    "load_synonyms",
    "normalize_attribute",
]

logger = logging.getLogger(__name__)

COMPARATORS = ("LT", "LE", "EQ", "GE", "GT", "BETWEEN")

EQ_REL_TOL = 1e-6

INDEX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Condition:
    attribute: str
    comparator: str
    value: float
    unit: str
    canonical_value: float
    canonical_unit: str
    value_high: float | None = None
    canonical_value_high: float | None = None

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")
        if not self.attribute:
            raise ValueError("condition attribute must be non-empty")
        if self.comparator == "BETWEEN":
            if self.canonical_value_high is None:
                raise ValueError("BETWEEN needs two values")
            if self.canonical_value > self.canonical_value_high:
                raise ValueError("BETWEEN bounds must satisfy low <= high")

    def to_dict(self) -> dict:
        d = {
            "attribute": self.attribute,
            "comparator": self.comparator,
            "value": self.value,
            "unit": self.unit,
            "canonical_value": self.canonical_value,
            "canonical_unit": self.canonical_unit,
        }
        if self.comparator == "BETWEEN":
            d["value_high"] = self.value_high
            d["canonical_value_high"] = self.canonical_value_high
        return d


def make_condition(
    attribute: str,
    comparator: str,
    value: float,
    unit: str = "",
    value_high: float | None = None,
    synonyms: dict[str, str] | None = None,
) -> Condition:
    """Normalize attribute and canonicalize values through the unit table."""
    q = normalize_quantity(value, unit)
    q_high = normalize_quantity(value_high, unit) if value_high is not None else None
    low, high = q.canonical_value, q_high.canonical_value if q_high else None
    raw_low, raw_high = value, value_high
    if comparator == "BETWEEN" and high is not None and low > high:
        low, high = high, low
        raw_low, raw_high = raw_high, raw_low
    return Condition(
        attribute=normalize_attribute(attribute, synonyms),
        comparator=comparator,
        value=raw_low,
        unit=unit,
        canonical_value=low,
        canonical_unit=q.canonical_unit,
        value_high=raw_high,
        canonical_value_high=high,
    )


@dataclass
class ValueIndex:
    # per normalized attribute: (canonical value, chunk_id), sorted
    attributes: dict[str, list[tuple[float, str]]] = field(default_factory=dict)


def index_entities(
    entities: Iterable[Entity], known_chunk_ids: set[str] | None = None
) -> ValueIndex:
    """Index valued entities by normalized attribute, sorted by value."""
    attrs: dict[str, list[tuple[float, str]]] = {}
    for e in entities:
        if known_chunk_ids is not None and e.chunk_id not in known_chunk_ids:
            raise DanglingEntity(f"entity {e.entity_id} references unknown chunk {e.chunk_id}")
        if e.value is None:
            continue
        attrs.setdefault(e.name, []).append((float(e.value), e.chunk_id))
    return ValueIndex(attributes={a: sorted(v) for a, v in sorted(attrs.items())})


def match_condition(cond: Condition, index: ValueIndex) -> set[str]:
    """Chunk ids with at least one entity satisfying the condition.

    Unknown attributes match nothing (with a diagnostics warning); EQ uses
    relative tolerance ``EQ_REL_TOL``.
    """
    entries = index.attributes.get(cond.attribute)
    if entries is None:
        logger.warning("condition attribute %r not present in the value index", cond.attribute)
        return set()
    values = [v for v, _ in entries]
    cv = cond.canonical_value
    if cond.comparator == "LT":
        selected = entries[: bisect_left(values, cv)]
    elif cond.comparator == "LE":
        selected = entries[: bisect_right(values, cv)]
    elif cond.comparator == "GT":
        selected = entries[bisect_right(values, cv) :]
    elif cond.comparator == "GE":
        selected = entries[bisect_left(values, cv) :]
    elif cond.comparator == "EQ":
        tol = EQ_REL_TOL * max(abs(cv), 1.0)
        lo = bisect_left(values, cv - tol)
        hi = bisect_right(values, cv + tol)
        selected = entries[lo:hi]
    else:  # BETWEEN
        lo = bisect_left(values, cv)
        hi = bisect_right(values, cond.canonical_value_high)
        selected = entries[lo:hi]
    return {cid for _, cid in selected}


def relational_score(chunk_id: str, conditions: list[Condition], index: ValueIndex) -> float:
    """Fraction of conditions the chunk satisfies; 0.0 when no conditions."""
    if not conditions:
        return 0.0
    satisfied = sum(1 for c in conditions if chunk_id in match_condition(c, index))
    return satisfied / len(conditions)


def save_index(index: ValueIndex, path: str | Path) -> None:
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "attributes": {a: [[v, cid] for v, cid in entries] for a, entries in index.attributes.items()},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), "utf-8")


def load_index(path: str | Path) -> ValueIndex:
    payload = json.loads(Path(path).read_text("utf-8"))
    return ValueIndex(
        attributes={
            a: [(v, cid) for v, cid in entries] for a, entries in payload["attributes"].items()
        }
    )
