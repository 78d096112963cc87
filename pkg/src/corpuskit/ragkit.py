"""Context assembly, generation-prompt construction, pluggable generator
client (deterministic mock for offline runs), and quantity-grounding
verification of generated answers.

The LLM-provider protocol here is shared by the query rewriter and the
external entity extractor: a provider takes role-tagged text segments and
returns text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import TYPE_CHECKING, Protocol

from .docmodel import split_sentences
from .errors import (
    EmptyResult,
    GeneratorUnavailable,
    InvalidPrompt,
    UnknownPlaceholder,
)
from .extraction import Quantity, extract_quantities
from .fusion import RetrievalResult

if TYPE_CHECKING:  # pragma: no cover
    from .querykit import CompositeQuery

DEFAULT_BUDGET_TOKENS = 4000

_CATEGORY_PRIORITY = {
    "Preparation": 0,
    "Characterization": 1,
    "Mechanism": 2,
    "Modeling": 3,
    "Tables": 4,
}

CITATION_INSTRUCTIONS = (
    "Cite the source of every factual statement with its bracketed key, "
    "e.g. [Ref 1]. Use only the numbered context passages; say so when the "
    "context does not answer the question."
)

#: relative tolerance for the derived-grounding formula check
DERIVED_TOL = 0.01


class LLMProvider(Protocol):
    def complete(self, segments: list[tuple[str, str]]) -> str: ...


class HTTPLLMProvider:
    """Minimal JSON-over-HTTP provider client.

    Request: ``{"model": ..., "segments": [{"role", "text"}]}``;
    response: ``{"text": ...}``.
    """

    def __init__(self, endpoint: str, model: str = "", api_key: str | None = None, timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def complete(self, segments: list[tuple[str, str]]) -> str:
        import urllib.error
        import urllib.request

        body = json.dumps(
            {"model": self.model, "segments": [{"role": r, "text": t} for r, t in segments]}
        ).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint, data=body, headers={"Content-Type": "application/json"}
        )
        if self.api_key:
            req.add_header("Authorization", f"Bearer {self.api_key}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))["text"]
        except (urllib.error.URLError, OSError, KeyError, ValueError) as exc:
            raise GeneratorUnavailable(f"LLM service failed: {exc}") from exc


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str = "mock_echo"  # or "external_service"
    endpoint: str | None = None
    model: str = ""
    api_key: str | None = None

    def __post_init__(self):
        if self.kind not in ("mock_echo", "external_service"):
            raise ValueError(f"unknown generator kind {self.kind!r}")


@dataclass(frozen=True)
class ContextEntry:
    ref: int
    chunk_id: str
    text: str
    token_count: int


@dataclass
class ContextPackage:
    entries: list[ContextEntry]
    budget: int
    tokens_used: int

    def citation_map(self) -> dict[int, str]:
        return {e.ref: e.chunk_id for e in self.entries}


@dataclass
class GroundingReport:
    grounded: list[tuple[Quantity, str]] = field(default_factory=list)
    derived: list[tuple[Quantity, str, tuple[float, float]]] = field(default_factory=list)
    ungrounded: list[Quantity] = field(default_factory=list)

    @property
    def ratio(self) -> float:
        total = len(self.grounded) + len(self.derived) + len(self.ungrounded)
        if total == 0:
            return 1.0
        return (len(self.grounded) + len(self.derived)) / total

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "grounded": [
                {**q.to_dict(), "source_chunk": cid} for q, cid in self.grounded
            ],
            "derived": [
                {**q.to_dict(), "formula": formula, "operands": list(operands)}
                for q, formula, operands in self.derived
            ],
            "ungrounded": [q.to_dict() for q in self.ungrounded],
        }


def assemble_context(
    result: RetrievalResult, budget_tokens: int = DEFAULT_BUDGET_TOKENS
) -> ContextPackage:
    """Greedy packing in article-rank then category-priority order; stops at
    the first chunk that would exceed the budget (never truncates mid-chunk).
    """
    if budget_tokens < 1:
        raise ValueError("budget must be >= 1")
    candidates = []
    for rank, article in enumerate(result.articles):
        for chunk in sorted(
            article.chunks,
            key=lambda c: (_CATEGORY_PRIORITY.get(c.category, 99), c.scored.chunk_id),
        ):
            candidates.append((rank, chunk))
    if not candidates:
        raise EmptyResult("retrieval produced no selectable chunks")

    entries: list[ContextEntry] = []
    used = 0
    for _, chunk in candidates:
        if used + chunk.token_count > budget_tokens:
            break
        entries.append(
            ContextEntry(
                ref=len(entries) + 1,
                chunk_id=chunk.scored.chunk_id,
                text=chunk.text,
                token_count=chunk.token_count,
            )
        )
        used += chunk.token_count
    if not entries:
        raise EmptyResult("token budget below the first selectable chunk")
    return ContextPackage(entries=entries, budget=budget_tokens, tokens_used=used)


_PLACEHOLDER_RE = re.compile(r"\{\{([A-Z_]+)\}\}")
_ALLOWED_PLACEHOLDERS = {"QUERY", "CONTEXT", "CITATION_INSTRUCTIONS"}


def default_template() -> str:
    return resources.files("corpuskit.assets").joinpath("prompt_generation.txt").read_text("utf-8")


def render_context(ctx: ContextPackage) -> str:
    """One line per entry: ``[Ref i] (chunk_id) flattened text``."""
    return "\n".join(
        f"[Ref {e.ref}] ({e.chunk_id}) {' '.join(e.text.split())}" for e in ctx.entries
    )


def build_prompt(q: "CompositeQuery", ctx: ContextPackage, template: str | None = None) -> str:
    """Substitute {{QUERY}}, {{CONTEXT}}, {{CITATION_INSTRUCTIONS}}.

    A template may omit placeholders, but an unknown one raises
    :class:`UnknownPlaceholder`.
    """
    if not ctx.entries:
        raise EmptyResult("context package is empty")
    if template is None:
        template = default_template()
    unknown = [p for p in _PLACEHOLDER_RE.findall(template) if p not in _ALLOWED_PLACEHOLDERS]
    if unknown:
        raise UnknownPlaceholder(", ".join(sorted(set(unknown))))
    return (
        template.replace("{{QUERY}}", q.cleaned)
        .replace("{{CONTEXT}}", render_context(ctx))
        .replace("{{CITATION_INSTRUCTIONS}}", CITATION_INSTRUCTIONS)
    )


_REF_LINE_RE = re.compile(r"^\[Ref (\d+)\] \((\S+)\) (.*)$")


def _mock_echo(prompt: str) -> str:
    """Deterministic digest: the question line plus every quantity-bearing
    context sentence, each tagged with its citation key."""
    lines: list[str] = []
    for line in prompt.split("\n"):
        if line.startswith("Question: "):
            lines.append(line)
            break
    for line in prompt.split("\n"):
        m = _REF_LINE_RE.match(line)
        if m is None:
            continue
        ref = m.group(1)
        for sentence in split_sentences(m.group(3)):
            if extract_quantities(sentence):
                lines.append(f"{sentence} [Ref {ref}]")
    return "\n".join(lines)


def generate(prompt: str, spec: GeneratorSpec = GeneratorSpec()) -> str:
    if not prompt.strip():
        raise InvalidPrompt("prompt is empty")
    if spec.kind == "mock_echo":
        return _mock_echo(prompt)
    if not spec.endpoint:
        raise GeneratorUnavailable("external generator requires an endpoint")
    provider = HTTPLLMProvider(spec.endpoint, spec.model, spec.api_key)
    return provider.complete([("user", prompt)])


def _values_match(answer_q: Quantity, ctx_q: Quantity, rel_tol: float) -> bool:
    """Dimension-aware value match; bare answer numbers (dimensionless or
    unknown) also match on the raw context value."""
    tol = rel_tol * max(abs(ctx_q.canonical_value), 1.0)
    if answer_q.dimension == ctx_q.dimension:
        return abs(answer_q.canonical_value - ctx_q.canonical_value) <= tol
    if answer_q.dimension in ("dimensionless", "unknown"):
        if abs(answer_q.canonical_value - ctx_q.canonical_value) <= tol:
            return True
        raw_tol = rel_tol * max(abs(ctx_q.value), 1.0)
        return abs(answer_q.canonical_value - ctx_q.value) <= raw_tol
    return False


_DERIVATIONS = (
    ("ratio", lambda a, b: a / b if b != 0 else None),
    ("relative_change", lambda a, b: (a - b) / b if b != 0 else None),
    ("difference", lambda a, b: a - b),
    ("sum", lambda a, b: a + b),
)


def verify_grounding(
    answer: str, ctx: ContextPackage, rel_tol: float = 1e-6
) -> GroundingReport:
    """Partition the answer's quantities into grounded (match a context
    quantity), derived-grounded (within 1% of a/b, (a-b)/b, a-b, or a+b over
    context value pairs), and ungrounded."""
    context_quantities: list[tuple[Quantity, str]] = []
    for entry in ctx.entries:
        for q in extract_quantities(entry.text, chunk_id=entry.chunk_id):
            context_quantities.append((q, entry.chunk_id))

    report = GroundingReport()
    values = [q.canonical_value for q, _ in context_quantities]
    for aq in extract_quantities(answer):
        hit = next(
            (cid for cq, cid in context_quantities if _values_match(aq, cq, rel_tol)), None
        )
        if hit is not None:
            report.grounded.append((aq, hit))
            continue
        derivation = _find_derivation(aq.canonical_value, values)
        if derivation is not None:
            report.derived.append((aq, derivation[0], (derivation[1], derivation[2])))
        else:
            report.ungrounded.append(aq)
    return report


def _find_derivation(target: float, values: list[float]) -> tuple[str, float, float] | None:
    for i, a in enumerate(values):
        for j, b in enumerate(values):
            if i == j:
                continue
            for name, fn in _DERIVATIONS:
                derived = fn(a, b)
                if derived is None:
                    continue
                if abs(target - derived) <= DERIVED_TOL * max(abs(derived), 1e-12):
                    return name, a, b
    return None


def relative_change(a: float, b: float) -> float:
    """(a - b) / b, exactly; raises ZeroDivisionError when b is 0."""
    if b == 0:
        raise ZeroDivisionError("relative_change requires b != 0")
    return (a - b) / b
