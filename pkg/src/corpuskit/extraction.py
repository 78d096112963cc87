"""Quantity and entity extraction, unit normalization, KG construction,
and quantity-set comparison.

The number grammar accepts integers (with optional exactly-3-digit thousands
groups), decimals, scientific notation, a ``~``/"about"/"approximately"
approximation prefix, and ratio forms like ``100:1``. A quantity may carry a
trailing unit token; known units are canonicalized through a fixed table,
unknown units pass through with dimension ``unknown``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Iterable, Protocol

from .errors import DanglingEntity, ExtractorUnavailable
from .lexicon import DEFAULT_MATERIALS, attribute_token_forms

if TYPE_CHECKING:  # pragma: no cover
    from .docmodel import Chunk

DIMENSIONS = (
    "length",
    "time",
    "rotational_speed",
    "thermal_conductivity",
    "mass_fraction",
    "temperature",
    "ratio",
    "dimensionless",
    "unknown",
)


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: str
    canonical_value: float
    canonical_unit: str
    dimension: str
    approx: bool = False
    span: tuple[int, int] = (0, 0)
    chunk_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "unit": self.unit,
            "canonical_value": self.canonical_value,
            "canonical_unit": self.canonical_unit,
            "dimension": self.dimension,
            "approx": self.approx,
            "span": list(self.span),
            "chunk_id": self.chunk_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Quantity":
        return cls(
            value=d["value"],
            unit=d["unit"],
            canonical_value=d["canonical_value"],
            canonical_unit=d["canonical_unit"],
            dimension=d["dimension"],
            approx=d.get("approx", False),
            span=tuple(d.get("span", (0, 0))),
            chunk_id=d.get("chunk_id"),
        )


@dataclass(frozen=True)
class Entity:
    entity_id: str
    type: str
    name: str
    value: float | None
    unit: str | None
    chunk_id: str
    span: tuple[int, int] = (0, 0)
    source: str = "baseline"

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "type": self.type,
            "name": self.name,
            "value": self.value,
            "unit": self.unit,
            "chunk_id": self.chunk_id,
            "span": list(self.span),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Entity":
        return cls(
            entity_id=d["entity_id"],
            type=d["type"],
            name=d["name"],
            value=d.get("value"),
            unit=d.get("unit"),
            chunk_id=d["chunk_id"],
            span=tuple(d.get("span", (0, 0))),
            source=d.get("source", "baseline"),
        )


@dataclass(frozen=True)
class KGNode:
    node_id: int
    type: str
    content: str
    value: float | None = None

    def to_dict(self) -> dict:
        return {"node_id": self.node_id, "type": self.type, "content": self.content, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "KGNode":
        return cls(d["node_id"], d["type"], d["content"], d.get("value"))


@dataclass(frozen=True)
class KGEdge:
    source: int
    target: int
    relation: str

    def to_dict(self) -> dict:
        return {"source": self.source, "target": self.target, "relation": self.relation}

    @classmethod
    def from_dict(cls, d: dict) -> "KGEdge":
        return cls(d["source"], d["target"], d["relation"])


@dataclass(frozen=True)
class MatchReport:
    matched: tuple[tuple[int, int], ...]
    precision: float
    recall: float
    unmatched_source: tuple[int, ...]
    unmatched_target: tuple[int, ...]


# --------------------------------------------------------------------------
# unit table

_CANONICAL = {
    "length": "nm",
    "time": "s",
    "rotational_speed": "rpm",
    "thermal_conductivity": "W/(m·K)",
    "mass_fraction": "wt%",
}

# surface -> (dimension, factor to canonical, canonical unit)
UNIT_TABLE: dict[str, tuple[str, float, str]] = {}


def _add_units(dimension: str, canonical: str, factors: dict[str, float]) -> None:
    for surface, factor in factors.items():
        UNIT_TABLE[surface] = (dimension, factor, canonical)


_add_units("length", "nm", {"nm": 1.0, "µm": 1e3, "um": 1e3, "μm": 1e3, "mm": 1e6, "cm": 1e7, "m": 1e9})
_add_units(
    "time",
    "s",
    {
        "s": 1.0,
        "sec": 1.0,
        "second": 1.0,
        "seconds": 1.0,
        "min": 60.0,
        "minute": 60.0,
        "minutes": 60.0,
        "h": 3600.0,
        "hr": 3600.0,
        "hour": 3600.0,
        "hours": 3600.0,
    },
)
_add_units("rotational_speed", "rpm", {"rpm": 1.0, "r/min": 1.0})
_add_units(
    "thermal_conductivity",
    "W/(m·K)",
    {"W/(m·K)": 1.0, "W/m·K": 1.0, "W/mK": 1.0, "W m-1 K-1": 1.0, "W/m*K": 1.0},
)
_add_units("mass_fraction", "wt%", {"wt%": 1.0, "wt.%": 1.0})
_add_units("dimensionless", "%", {"%": 1.0})
# temperatures keep their own unit; the table carries no affine conversions
UNIT_TABLE["°C"] = ("temperature", 1.0, "°C")
UNIT_TABLE["℃"] = ("temperature", 1.0, "°C")
UNIT_TABLE["K"] = ("temperature", 1.0, "K")

_KNOWN_UNITS = sorted(UNIT_TABLE, key=len, reverse=True)

# words never captured as an unknown trailing unit (they are connectives,
# not measures); known-table units are exempt from this filter
_UNIT_STOPWORDS = frozenset(
    "and or of the an a to in at on for with by from as is are was were".split()
)

_UNIT_BODY = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyzµμ°%·/")


def normalize_quantity(
    value: float,
    unit: str,
    *,
    approx: bool = False,
    span: tuple[int, int] = (0, 0),
    chunk_id: str | None = None,
    dimension: str | None = None,
) -> Quantity:
    """Canonicalize ``(value, unit)`` through the unit table.

    Unknown units pass through unchanged with dimension ``unknown``; an empty
    unit is ``dimensionless``. Idempotent on canonical quantities.
    """
    unit = unit.strip()
    if dimension == "ratio":
        return Quantity(value, unit, value, "", "ratio", approx, span, chunk_id)
    if unit == "":
        return Quantity(value, "", value, "", "dimensionless", approx, span, chunk_id)
    entry = UNIT_TABLE.get(unit)
    if entry is None:
        return Quantity(value, unit, value, unit, "unknown", approx, span, chunk_id)
    dim, factor, canonical = entry
    return Quantity(value, unit, value * factor, canonical, dim, approx, span, chunk_id)


_NUM_PLAIN = r"\d+(?:\.\d+)?"
_NUMBER_RE = re.compile(
    r"(?<![\w.,])"
    r"(?P<approx>~|about\s+|approximately\s+)?"
    r"(?P<neg>-)?"
    r"(?P<num>"
    rf"{_NUM_PLAIN}(?:\s*:\s*{_NUM_PLAIN})+"  # ratio a:b(:c...)
    r"|\d+(?:\.\d+)?[eE][+-]?\d+"  # scientific
    r"|\d{1,3}(?:,\d{3})+(?:\.\d+)?"  # thousands groups
    r"|\d+\.\d+"  # decimal
    r"|\d+"  # integer
    r")(?!\d)",
    re.IGNORECASE,
)

_UNKNOWN_UNIT_RE = re.compile(r"[A-Za-zµμ°]+(?:[·/][A-Za-zµμ°]+)*%?")


def _match_unit(text: str, pos: int) -> tuple[str, int] | None:
    """Try to read a unit token at ``pos``; returns (unit, end) or None."""
    n = len(text)
    while pos < n and text[pos] in " \t":
        pos += 1
    if pos >= n:
        return None
    for surface in _KNOWN_UNITS:
        end = pos + len(surface)
        if text.startswith(surface, pos) and (end >= n or text[end] not in _UNIT_BODY):
            return surface, end
    m = _UNKNOWN_UNIT_RE.match(text, pos)
    if m is None:
        return None
    end = m.end()
    if end < n and text[end].isdigit():
        return None
    word = m.group(0)
    if word.lower() in _UNIT_STOPWORDS:
        return None
    return word, end


def extract_quantities(text: str, chunk_id: str | None = None) -> list[Quantity]:
    """Extract all quantities left-to-right, non-overlapping.

    Spans cover the approximation prefix, the number, and the unit token, so
    re-extracting the concatenated spans reproduces the value list.
    """
    out: list[Quantity] = []
    pos = 0
    while True:
        m = _NUMBER_RE.search(text, pos)
        if m is None:
            break
        numtext = m.group("num")
        approx = m.group("approx") is not None
        start = m.start()
        end = m.end()
        if ":" in numtext:
            parts = [float(p) for p in re.split(r"\s*:\s*", numtext)]
            value = parts[0] / parts[1] if parts[1] != 0 else parts[0]
            out.append(
                normalize_quantity(
                    value, "", approx=approx, span=(start, end), chunk_id=chunk_id, dimension="ratio"
                )
            )
            pos = end
            continue
        value = float(numtext.replace(",", ""))
        if m.group("neg"):
            value = -value
        unit_hit = _match_unit(text, end)
        if unit_hit is not None:
            unit, end = unit_hit
        else:
            unit = ""
        out.append(normalize_quantity(value, unit, approx=approx, span=(start, end), chunk_id=chunk_id))
        pos = end
    return out


# --------------------------------------------------------------------------
# entity extraction

_WORD_RE = re.compile(r"[a-z0-9]+")

#: token window within which a quantity is attributed to a preceding keyword
ATTRIBUTION_WINDOW = 6


class EntityExtractor(Protocol):
    def extract(self, chunk: "Chunk") -> list[Entity]: ...


def _token_spans(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(text.lower())]


def _ngram_hits(
    tokens: list[tuple[str, int, int]], forms: dict[tuple[str, ...], str], max_len: int
) -> list[tuple[int, int, str]]:
    """Non-overlapping longest-first matches; returns (start_tok, end_tok, name)."""
    hits: list[tuple[int, int, str]] = []
    i = 0
    while i < len(tokens):
        matched = False
        for ln in range(min(max_len, len(tokens) - i), 0, -1):
            gram = tuple(t[0] for t in tokens[i : i + ln])
            if gram in forms:
                hits.append((i, i + ln - 1, forms[gram]))
                i += ln
                matched = True
                break
        if not matched:
            i += 1
    return hits


class BaselineExtractor:
    """Deterministic rule-based entity extractor.

    Each quantity is attributed to the nearest preceding attribute keyword
    within ``ATTRIBUTION_WINDOW`` tokens; unattributed quantities become
    entities named "quantity". Material lexicon terms become value-less
    material entities.
    """

    def __init__(
        self,
        synonyms: dict[str, str] | None = None,
        materials: Iterable[tuple[str, ...]] = DEFAULT_MATERIALS,
    ):
        self._attr_forms = attribute_token_forms(synonyms)
        self._material_forms = {tuple(m): " ".join(m) for m in materials}
        self._max_attr = max((len(k) for k in self._attr_forms), default=1)
        self._max_mat = max((len(k) for k in self._material_forms), default=1)

    def extract(self, chunk: "Chunk") -> list[Entity]:
        text = chunk.text
        tokens = _token_spans(text)
        attr_hits = _ngram_hits(tokens, self._attr_forms, self._max_attr)
        attr_end_by_idx = {end: name for _, end, name in attr_hits}
        mat_hits = _ngram_hits(tokens, self._material_forms, self._max_mat)

        entities: list[Entity] = []
        counter = 0

        def next_id() -> str:
            nonlocal counter
            eid = f"{chunk.chunk_id}:e{counter}"
            counter += 1
            return eid

        for q in extract_quantities(text, chunk_id=chunk.chunk_id):
            num_tok = self._number_token_index(tokens, q.span)
            name = "quantity"
            if num_tok is not None:
                for j in range(num_tok - 1, max(num_tok - 1 - ATTRIBUTION_WINDOW, -1), -1):
                    if j in attr_end_by_idx:
                        name = attr_end_by_idx[j]
                        break
            entities.append(
                Entity(
                    entity_id=next_id(),
                    type="parameter",
                    name=name,
                    value=q.canonical_value,
                    unit=q.canonical_unit,
                    chunk_id=chunk.chunk_id,
                    span=q.span,
                )
            )
        for start_tok, end_tok, name in mat_hits:
            entities.append(
                Entity(
                    entity_id=next_id(),
                    type="material",
                    name=name,
                    value=None,
                    unit=None,
                    chunk_id=chunk.chunk_id,
                    span=(tokens[start_tok][1], tokens[end_tok][2]),
                )
            )
        return entities

    @staticmethod
    def _number_token_index(tokens: list[tuple[str, int, int]], span: tuple[int, int]) -> int | None:
        for i, (tok, start, end) in enumerate(tokens):
            if start >= span[0] and end <= span[1] and tok[0].isdigit():
                return i
        return None


class LLMEntityExtractor:
    """Entity extraction through an external LLM provider.

    The provider receives the chunk text plus the attribute lexicon and must
    answer with a JSON array of entity objects in the wire shape of
    :class:`Entity`. Any transport or parse failure raises
    :class:`ExtractorUnavailable` so callers can fall back to the baseline.
    """

    def __init__(self, provider, synonyms: dict[str, str] | None = None):
        self.provider = provider
        self._synonyms = synonyms

    def extract(self, chunk: "Chunk") -> list[Entity]:
        import json

        from .lexicon import DEFAULT_SYNONYMS

        lexicon = sorted(set((self._synonyms or DEFAULT_SYNONYMS).values()))
        request = (
            "Extract parameter and material entities from the passage below. "
            "Answer with a JSON array; each element must have the keys "
            '"type", "name", "value", "unit". Normalize attribute names to: '
            + ", ".join(lexicon)
            + "\n\nPassage:\n"
            + chunk.text
        )
        try:
            raw = self.provider.complete([("user", request)])
            records = json.loads(raw)
            entities = []
            for i, rec in enumerate(records):
                entities.append(
                    Entity(
                        entity_id=f"{chunk.chunk_id}:e{i}",
                        type=rec["type"],
                        name=rec["name"],
                        value=rec.get("value"),
                        unit=rec.get("unit"),
                        chunk_id=chunk.chunk_id,
                        source="external",
                    )
                )
            return entities
        except Exception as exc:
            raise ExtractorUnavailable(f"external entity extractor failed: {exc}") from exc


def extract_entities(chunk: "Chunk", extractor: EntityExtractor | None = None) -> list[Entity]:
    if extractor is None:
        extractor = BaselineExtractor()
    return extractor.extract(chunk)


# --------------------------------------------------------------------------
# knowledge-graph layer

def build_graph(chunks: list["Chunk"], entities: list[Entity]) -> tuple[list[KGNode], list[KGEdge]]:
    """One node per chunk, one per deduplicated entity, plus mention and
    material->parameter edges. Node ids are dense in deterministic order.
    """
    chunk_ids = [c.chunk_id for c in chunks]
    known = set(chunk_ids)
    for e in entities:
        if e.chunk_id not in known:
            raise DanglingEntity(f"entity {e.entity_id} references unknown chunk {e.chunk_id}")

    nodes: list[KGNode] = []
    edges: list[KGEdge] = []
    chunk_node: dict[str, int] = {}
    for cid in chunk_ids:
        chunk_node[cid] = len(nodes)
        nodes.append(KGNode(len(nodes), "chunk", cid))

    by_chunk: dict[str, list[Entity]] = {cid: [] for cid in chunk_ids}
    for e in entities:
        by_chunk[e.chunk_id].append(e)

    for cid in chunk_ids:
        seen: dict[tuple, int] = {}
        materials: list[int] = []
        parameters: list[int] = []
        for e in by_chunk[cid]:
            key = (e.name, e.value, e.unit)
            if key in seen:
                continue
            node_id = len(nodes)
            seen[key] = node_id
            nodes.append(KGNode(node_id, e.type, e.name, e.value))
            edges.append(KGEdge(chunk_node[cid], node_id, "mentions"))
            if e.type == "material":
                materials.append(node_id)
            elif e.type == "parameter":
                parameters.append(node_id)
        for m in materials:
            for p in parameters:
                edges.append(KGEdge(m, p, "has_parameter"))
    return nodes, edges


# --------------------------------------------------------------------------
# quantity-set comparison

def quantities_match(source: Quantity, target: Quantity, rel_tol: float) -> bool:
    return source.dimension == target.dimension and abs(
        source.canonical_value - target.canonical_value
    ) <= rel_tol * max(abs(source.canonical_value), 1.0)


def compare_quantity_sets(
    source: list[Quantity], target: list[Quantity], rel_tol: float = 1e-9
) -> MatchReport:
    """Maximum bipartite matching between two quantity multisets.

    precision = |matched| / |target| (1 when target is empty);
    recall = |matched| / |source| (1 when source is empty).
    """
    adj: list[list[int]] = [
        [j for j, t in enumerate(target) if quantities_match(s, t, rel_tol)] for s in source
    ]
    match_t: list[int] = [-1] * len(target)

    def augment(i: int, visited: list[bool]) -> bool:
        for j in adj[i]:
            if visited[j]:
                continue
            visited[j] = True
            if match_t[j] == -1 or augment(match_t[j], visited):
                match_t[j] = i
                return True
        return False

    for i in range(len(source)):
        augment(i, [False] * len(target))

    matched = tuple(sorted((i, j) for j, i in enumerate(match_t) if i != -1))
    matched_s = {i for i, _ in matched}
    matched_t = {j for _, j in matched}
    precision = len(matched) / len(target) if target else 1.0
    recall = len(matched) / len(source) if source else 1.0
    return MatchReport(
        matched=matched,
        precision=precision,
        recall=recall,
        unmatched_source=tuple(i for i in range(len(source)) if i not in matched_s),
        unmatched_target=tuple(j for j in range(len(target)) if j not in matched_t),
    )


def requantify(q: Quantity, chunk_id: str) -> Quantity:
    """Attach a source chunk reference to a quantity."""
    return replace(q, chunk_id=chunk_id)
