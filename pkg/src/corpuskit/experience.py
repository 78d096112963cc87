"""Iterative experience distillation: batch integration of retrieved chunks
into a versioned guide with deterministic quality checks, review gates, and a
replayable audit trail."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

from .docmodel import Chunk, split_sentences
from .errors import EmptyObjective, GeneratorUnavailable, NoRetrievedChunks, StaleDraft
from .extraction import (
    BaselineExtractor,
    Quantity,
    compare_quantity_sets,
    extract_quantities,
)
from .ragkit import GeneratorSpec, HTTPLLMProvider

DEFAULT_TEMPLATE = ("Scope", "Parameters", "Procedure", "Pitfalls", "Characterization", "References")

QUALITY_REL_TOL = 1e-6


@dataclass
class Section:
    title: str
    body: str = ""


@dataclass(frozen=True)
class ReviewDecision:
    kind: str  # accept | reject | edit
    edited_text: str = ""
    note: str = ""

    def __post_init__(self):
        if self.kind not in ("accept", "reject", "edit"):
            raise ValueError(f"unknown review decision {self.kind!r}")
        if self.kind == "edit" and not self.edited_text.strip():
            raise ValueError("edit decision requires non-empty text")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "edited_text": self.edited_text, "note": self.note}

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewDecision":
        return cls(d["kind"], d.get("edited_text", ""), d.get("note", ""))


@dataclass
class QualityReport:
    grounding_ratio: float
    entity_coverage: float
    ungrounded: list[Quantity] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "grounding_ratio": self.grounding_ratio,
            "entity_coverage": self.entity_coverage,
            "ungrounded": [q.to_dict() for q in self.ungrounded],
        }


@dataclass
class IterationRecord:
    index: int
    batch_chunk_ids: list[str]
    draft_digest: str
    quality: QualityReport | None
    decision: ReviewDecision
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "batch_chunk_ids": list(self.batch_chunk_ids),
            "draft_digest": self.draft_digest,
            "quality": self.quality.to_dict() if self.quality else None,
            "decision": self.decision.to_dict(),
            "timestamp": self.timestamp,
        }


@dataclass
class ExperienceDoc:
    objective: str
    version: int = 0
    sections: list[Section] = field(default_factory=list)
    audit_trail: list[IterationRecord] = field(default_factory=list)
    # draft bookkeeping (unset on accepted docs)
    base_digest: str | None = None
    batch_chunk_ids: list[str] = field(default_factory=list)


def doc_digest(doc: ExperienceDoc) -> str:
    payload = json.dumps(
        [doc.objective, [[s.title, s.body] for s in doc.sections]], sort_keys=True
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def doc_text(doc: ExperienceDoc) -> str:
    return "\n\n".join(s.body for s in doc.sections if s.body)


def init_experience(objective: str, template: Iterable[str] | None = None) -> ExperienceDoc:
    if not objective.strip():
        raise EmptyObjective("objective must be non-empty")
    titles = tuple(template) if template is not None else DEFAULT_TEMPLATE
    return ExperienceDoc(
        objective=objective.strip(), sections=[Section(t) for t in titles]
    )


def _copy_doc(doc: ExperienceDoc) -> ExperienceDoc:
    return ExperienceDoc(
        objective=doc.objective,
        version=doc.version,
        sections=[Section(s.title, s.body) for s in doc.sections],
        audit_trail=list(doc.audit_trail),
    )


def _append(doc: ExperienceDoc, title: str, line: str) -> None:
    for section in doc.sections:
        if section.title == title:
            section.body = f"{section.body}\n{line}" if section.body else line
            return
    doc.sections.append(Section(title, line))


def distill_template() -> str:
    return resources.files("corpuskit.assets").joinpath("prompt_distill.txt").read_text("utf-8")


def integrate_batch(
    doc: ExperienceDoc, chunks: list[Chunk], llm_spec: GeneratorSpec = GeneratorSpec()
) -> ExperienceDoc:
    """Produce an unaccepted draft integrating the batch.

    Mock provider: per chunk, quantity-bearing sentences are appended under
    Parameters and the chunk heading under References. External provider:
    the current guide plus the batch go through the distillation template and
    the response is parsed back into sections.
    """
    if not chunks:
        raise ValueError("batch must be non-empty")
    draft = _copy_doc(doc)
    draft.base_digest = doc_digest(doc)
    draft.batch_chunk_ids = [c.chunk_id for c in chunks]
    if llm_spec.kind == "mock_echo":
        for chunk in chunks:
            for sentence in split_sentences(chunk.text):
                if extract_quantities(sentence):
                    _append(draft, "Parameters", f"- {sentence}")
            _append(draft, "References", f"- {chunk.heading}")
        return draft
    if not llm_spec.endpoint:
        raise GeneratorUnavailable("external distillation requires an endpoint")
    provider = HTTPLLMProvider(llm_spec.endpoint, llm_spec.model, llm_spec.api_key)
    prompt = (
        distill_template()
        .replace("{{OBJECTIVE}}", doc.objective)
        .replace("{{CURRENT_DOC}}", serialize_experience(doc))
        .replace("{{BATCH}}", "\n\n".join(c.text for c in chunks))
    )
    response = provider.complete([("user", prompt)])
    draft.sections = _parse_sections(response)
    return draft


def quality_check(
    draft: ExperienceDoc, source_chunks: list[Chunk], rel_tol: float = QUALITY_REL_TOL
) -> QualityReport:
    """Grounding ratio of draft quantities against the union of source-chunk
    quantities, plus coverage of source parameter entities.

    An empty draft is vacuously grounded (ratio 1.0) but covers nothing.
    """
    text = doc_text(draft)
    draft_quantities = extract_quantities(text)
    source_quantities = [
        q for chunk in source_chunks for q in extract_quantities(chunk.text)
    ]
    report = compare_quantity_sets(draft_quantities, source_quantities, rel_tol)
    ungrounded = [draft_quantities[i] for i in report.unmatched_source]

    extractor = BaselineExtractor()
    source_entities = {}
    for chunk in source_chunks:
        for e in extractor.extract(chunk):
            if e.type == "parameter":
                source_entities.setdefault((e.name, e.value, e.unit), e)
    if not text.strip():
        coverage = 0.0
    elif not source_entities:
        coverage = 1.0
    else:
        lowered = text.lower()
        mentioned = 0
        for (name, value, unit), entity in source_entities.items():
            if value is not None:
                if any(_entity_value_match(value, unit, dq, rel_tol) for dq in draft_quantities):
                    mentioned += 1
            elif name.replace("_", " ") in lowered:
                mentioned += 1
        coverage = mentioned / len(source_entities)
    return QualityReport(
        grounding_ratio=report.recall, entity_coverage=coverage, ungrounded=ungrounded
    )


def _entity_value_match(value: float, unit: str | None, dq: Quantity, rel_tol: float) -> bool:
    """Entity canonical values against a draft quantity; unitless entities
    (ratios, bare numbers) match any unitless draft quantity."""
    from .extraction import UNIT_TABLE

    if abs(value - dq.canonical_value) > rel_tol * max(abs(value), 1.0):
        return False
    if not unit:
        return dq.dimension in ("ratio", "dimensionless", "unknown")
    entry = UNIT_TABLE.get(unit)
    return dq.dimension == (entry[0] if entry else "unknown")


def apply_review(
    doc: ExperienceDoc,
    draft: ExperienceDoc,
    decision: ReviewDecision,
    quality: QualityReport | None = None,
) -> ExperienceDoc:
    """Accept/reject/edit a draft; an IterationRecord is appended either way.

    Raises :class:`StaleDraft` when the draft was not derived from the
    current document version.
    """
    if draft.base_digest != doc_digest(doc):
        raise StaleDraft("draft does not derive from the current document")
    if decision.kind == "accept":
        result = _copy_doc(draft)
        result.version = doc.version + 1
    elif decision.kind == "edit":
        result = _copy_doc(doc)
        result.sections = _parse_sections(decision.edited_text)
        result.version = doc.version + 1
    else:
        result = _copy_doc(doc)
    record = IterationRecord(
        index=len(doc.audit_trail),
        batch_chunk_ids=list(draft.batch_chunk_ids),
        draft_digest=doc_digest(result if decision.kind != "reject" else draft),
        quality=quality,
        decision=decision,
        timestamp=time.time(),
    )
    result.audit_trail = doc.audit_trail + [record]
    return result


@dataclass
class ExperienceConfig:
    batch_size: int = 20
    max_iterations: int = 10
    review_mode: str = "auto_accept"  # or "interactive"
    llm_spec: GeneratorSpec = GeneratorSpec()
    template: tuple[str, ...] | None = None
    reviewer: Callable[[ExperienceDoc, QualityReport], ReviewDecision] | None = None

    def __post_init__(self):
        if self.review_mode not in ("auto_accept", "interactive"):
            raise ValueError(f"unknown review mode {self.review_mode!r}")
        if self.review_mode == "interactive" and self.reviewer is None:
            raise ValueError("interactive review requires a reviewer callback")


def run_loop(
    objective: str,
    retriever: Callable[[str], list[Chunk]],
    config: ExperienceConfig = ExperienceConfig(),
) -> ExperienceDoc:
    """Retrieve chunks for the objective, integrate them batch by batch, and
    gate each draft through quality checks and review.

    Stops when batches are exhausted, ``max_iterations`` is reached, or the
    reviewer rejects twice in a row.
    """
    chunks = retriever(objective)
    if not chunks:
        raise NoRetrievedChunks(f"no chunks retrieved for objective {objective!r}")
    doc = init_experience(objective, config.template)
    batches = [
        chunks[i : i + config.batch_size] for i in range(0, len(chunks), config.batch_size)
    ]
    accepted_chunks: list[Chunk] = []
    consecutive_rejects = 0
    for iteration, batch in enumerate(batches):
        if iteration >= config.max_iterations:
            break
        draft = integrate_batch(doc, batch, config.llm_spec)
        quality = quality_check(draft, accepted_chunks + batch)
        if config.review_mode == "auto_accept":
            decision = ReviewDecision("accept")
        else:
            decision = config.reviewer(draft, quality)
        doc = apply_review(doc, draft, decision, quality)
        if decision.kind == "reject":
            consecutive_rejects += 1
            if consecutive_rejects >= 2:
                break
        else:
            consecutive_rejects = 0
            accepted_chunks.extend(batch)
    return doc


def replay_trail(
    objective: str,
    records: list[IterationRecord],
    chunks_by_id: dict[str, Chunk],
    llm_spec: GeneratorSpec = GeneratorSpec(),
    template: Iterable[str] | None = None,
) -> ExperienceDoc:
    """Re-run recorded batches and decisions; under the mock provider this
    reproduces the final document digest exactly."""
    doc = init_experience(objective, template)
    for record in records:
        batch = [chunks_by_id[cid] for cid in record.batch_chunk_ids]
        draft = integrate_batch(doc, batch, llm_spec)
        doc = apply_review(doc, draft, record.decision, record.quality)
    return doc


# --------------------------------------------------------------------------
# persistence (same heading conventions as the article format)

def serialize_experience(doc: ExperienceDoc) -> str:
    out = ["---", f"objective: {doc.objective}", f"version: {doc.version}", "---"]
    for section in doc.sections:
        out.append("")
        out.append(f"# {section.title}")
        if section.body:
            out.append("")
            out.append(section.body)
    return "\n".join(out) + "\n"


def _parse_sections(text: str) -> list[Section]:
    sections: list[Section] = []
    current: Section | None = None
    body_lines: list[str] = []

    def flush():
        if current is not None:
            current.body = "\n".join(body_lines).strip("\n")

    for line in text.split("\n"):
        if line.startswith("# "):
            flush()
            current = Section(line[2:].strip())
            sections.append(current)
            body_lines = []
        elif current is not None:
            body_lines.append(line)
    flush()
    if not sections:
        sections = [Section("Notes", text.strip())]
    return sections


def save_experience(doc: ExperienceDoc, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_experience(doc), "utf-8")
    sidecar = path.with_suffix(".audit.jsonl")
    sidecar.write_text(
        "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in doc.audit_trail),
        "utf-8",
    )
    return path


def load_audit_trail(path: str | Path) -> list[IterationRecord]:
    records = []
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        quality = None
        if d.get("quality"):
            qd = d["quality"]
            quality = QualityReport(
                grounding_ratio=qd["grounding_ratio"],
                entity_coverage=qd["entity_coverage"],
                ungrounded=[Quantity.from_dict(u) for u in qd.get("ungrounded", [])],
            )
        records.append(
            IterationRecord(
                index=d["index"],
                batch_chunk_ids=list(d["batch_chunk_ids"]),
                draft_digest=d["draft_digest"],
                quality=quality,
                decision=ReviewDecision.from_dict(d["decision"]),
                timestamp=d["timestamp"],
            )
        )
    return records
