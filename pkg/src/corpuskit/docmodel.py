"""Lightly structured article format: parsing, canonical serialization,
schema validation, and chunking into retrieval units.

File format
-----------
A front-matter block delimited by ``---`` lines holds ``key: value`` pairs
(``article_id`` mandatory, ``authors`` semicolon-separated). Level-1 headings
(``# Preparation``) open category modules, level-2 headings open subsections,
and ``###`` blocks attach verbatim evidence snippets to the nearest preceding
subsection. Paragraphs are separated by blank lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import extraction, lexindex
from .errors import MalformedHeading, MissingArticleId, MissingFrontMatter

CATEGORIES = ("Preparation", "Characterization", "Mechanism", "Modeling", "Tables")

#: accepted subsection headings per category; Tables accepts anything
SECTION_VOCABULARY: dict[str, frozenset[str]] = {
    "Preparation": frozenset({"General", "Process", "Product", "Conclusion"}),
    "Characterization": frozenset({"General", "Results", "Control Study", "Conclusion", "Instrument"}),
    "Mechanism": frozenset({"Mechanism", "Comparison", "Conclusion"}),
    "Modeling": frozenset({"Overview", "Theory", "Methods", "Simulation"}),
}

_CATEGORY_ORDER = {name: i for i, name in enumerate(CATEGORIES)}

_SENTENCE_BOUNDARY = re.compile(r"[.!?](?=\s+[A-Z0-9])")
_ID_FORBIDDEN = re.compile(r"[#/]")


@dataclass
class ArticleMeta:
    article_id: str
    title: str = ""
    abstract: str = ""
    authors: list[str] = field(default_factory=list)
    journal: str = ""
    year: int | None = None
    doi: str | None = None


@dataclass
class SectionUnit:
    heading: str
    body: str
    evidence: list[str] = field(default_factory=list)
    order: int = 0


@dataclass
class ModuleBlock:
    category: str
    sections: list[SectionUnit] = field(default_factory=list)


@dataclass
class Article:
    meta: ArticleMeta
    modules: list[ModuleBlock] = field(default_factory=list)


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    article_id: str
    category: str
    heading: str
    text: str
    token_count: int
    sentence_count: int
    quantity_count: int

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "article_id": self.article_id,
            "category": self.category,
            "heading": self.heading,
            "text": self.text,
            "token_count": self.token_count,
            "sentence_count": self.sentence_count,
            "quantity_count": self.quantity_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Chunk":
        return cls(**d)


@dataclass(frozen=True)
class Issue:
    location: str
    code: str
    message: str

    def to_dict(self) -> dict:
        return {"location": self.location, "code": self.code, "message": self.message}


@dataclass
class ValidationReport:
    errors: list[Issue] = field(default_factory=list)
    warnings: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def make_chunk_id(article_id: str, category: str, order: int) -> str:
    return f"{article_id}#{category}/{order}"


def parse_chunk_id(chunk_id: str) -> tuple[str, str, int]:
    article_id, _, rest = chunk_id.partition("#")
    category, _, order = rest.rpartition("/")
    if not article_id or not category or not order.isdigit():
        raise ValueError(f"malformed chunk id: {chunk_id!r}")
    return article_id, category, int(order)


def count_sentences(text: str) -> int:
    """Boundaries are ``.``/``?``/``!`` followed by whitespace and an
    uppercase letter or digit, which is robust to decimals like 0.68."""
    if not text.strip():
        return 0
    return len(_SENTENCE_BOUNDARY.findall(text)) + 1


def split_sentences(text: str) -> list[str]:
    if not text.strip():
        return []
    pieces = []
    last = 0
    for m in _SENTENCE_BOUNDARY.finditer(text):
        pieces.append(text[last : m.end()])
        last = m.end()
    pieces.append(text[last:])
    return [p.strip() for p in pieces if p.strip()]


# --------------------------------------------------------------------------
# parsing

def _parse_front_matter(lines: list[str], idx: int) -> tuple[dict[str, str], int]:
    while idx < len(lines) and not lines[idx].strip():
        idx += 1
    if idx >= len(lines) or lines[idx].strip() != "---":
        raise MissingFrontMatter("expected a '---' front-matter block at the top")
    idx += 1
    fields: dict[str, str] = {}
    while idx < len(lines):
        line = lines[idx].rstrip()
        if line.strip() == "---":
            return fields, idx + 1
        if line.strip():
            key, sep, value = line.partition(":")
            if sep:
                fields[key.strip()] = value.strip()
        idx += 1
    raise MissingFrontMatter("front-matter block is not closed by '---'")


def _meta_from_fields(fields: dict[str, str]) -> ArticleMeta:
    article_id = fields.get("article_id", "").strip()
    if not article_id:
        raise MissingArticleId("front matter must define a non-empty article_id")
    year_text = fields.get("year", "").strip()
    return ArticleMeta(
        article_id=article_id,
        title=fields.get("title", ""),
        abstract=fields.get("abstract", ""),
        authors=[a.strip() for a in fields.get("authors", "").split(";") if a.strip()],
        journal=fields.get("journal", ""),
        year=int(year_text) if year_text else None,
        doi=fields.get("doi") or None,
    )


def parse_article(text: str) -> Article:
    """Parse structured-article text into an :class:`Article`.

    Raises :class:`MissingFrontMatter`, :class:`MissingArticleId`, or
    :class:`MalformedHeading` (a ``###`` block before any ``##``, or any
    heading before its parent level).
    """
    lines = text.split("\n")
    fields, idx = _parse_front_matter(lines, 0)
    meta = _meta_from_fields(fields)

    article = Article(meta=meta)
    module: ModuleBlock | None = None
    section: SectionUnit | None = None
    in_evidence = False
    paragraph: list[str] = []

    def flush_paragraph():
        nonlocal paragraph
        if not paragraph:
            return
        block = "\n".join(paragraph)
        paragraph = []
        if section is None:
            raise MalformedHeading(f"text outside any subsection near: {block[:40]!r}")
        if in_evidence:
            section.evidence.append(block)
        elif section.body:
            section.body += "\n\n" + block
        else:
            section.body = block

    for line in lines[idx:]:
        stripped = line.rstrip()
        if stripped.startswith("###"):
            flush_paragraph()
            if section is None:
                raise MalformedHeading("evidence block before any subsection heading")
            in_evidence = True
        elif stripped.startswith("##"):
            flush_paragraph()
            if module is None:
                raise MalformedHeading("subsection heading before any category heading")
            section = SectionUnit(
                heading=stripped[2:].strip(), body="", order=len(module.sections)
            )
            module.sections.append(section)
            in_evidence = False
        elif stripped.startswith("#"):
            flush_paragraph()
            module = ModuleBlock(category=stripped[1:].strip())
            article.modules.append(module)
            section = None
            in_evidence = False
        elif not stripped.strip():
            flush_paragraph()
        else:
            paragraph.append(stripped)
    flush_paragraph()
    return article


# --------------------------------------------------------------------------
# serialization

def serialize_article(article: Article) -> str:
    """Emit canonical text: sorted front-matter keys, canonical module order,
    one blank line between blocks. Idempotent on its own output."""
    meta = article.meta
    fields: dict[str, str] = {"article_id": meta.article_id}
    if meta.title:
        fields["title"] = meta.title
    if meta.abstract:
        fields["abstract"] = meta.abstract
    if meta.authors:
        fields["authors"] = "; ".join(meta.authors)
    if meta.journal:
        fields["journal"] = meta.journal
    if meta.year is not None:
        fields["year"] = str(meta.year)
    if meta.doi:
        fields["doi"] = meta.doi

    out: list[str] = ["---"]
    out.extend(f"{k}: {fields[k]}" for k in sorted(fields))
    out.append("---")

    modules = sorted(
        article.modules, key=lambda m: _CATEGORY_ORDER.get(m.category, len(CATEGORIES))
    )
    for module in modules:
        out.append("")
        out.append(f"# {module.category}")
        for section in sorted(module.sections, key=lambda s: s.order):
            out.append("")
            out.append(f"## {section.heading}")
            if section.body:
                out.append("")
                out.append(section.body)
            if section.evidence:
                out.append("")
                out.append("### evidence")
                for snippet in section.evidence:
                    out.append("")
                    out.append(snippet)
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# validation

def validate_schema(article: Article) -> ValidationReport:
    """Errors: unknown/duplicate categories, bad article id, bad section
    order. Warnings: headings outside the category vocabulary, empty article.
    """
    report = ValidationReport()
    meta_loc = article.meta.article_id or "<meta>"
    if not article.meta.article_id:
        report.errors.append(Issue(meta_loc, "BadArticleId", "article_id is empty"))
    elif _ID_FORBIDDEN.search(article.meta.article_id):
        report.errors.append(
            Issue(meta_loc, "BadArticleId", "article_id must not contain '#' or '/'")
        )
    if not article.modules:
        report.warnings.append(Issue(meta_loc, "EmptyArticle", "article has no modules"))

    seen: set[str] = set()
    for module in article.modules:
        loc = f"{meta_loc}/{module.category}"
        if module.category not in _CATEGORY_ORDER:
            report.errors.append(
                Issue(loc, "UnknownCategory", f"unknown category {module.category!r}")
            )
            continue
        if module.category in seen:
            report.errors.append(
                Issue(loc, "DuplicateCategory", f"category {module.category!r} repeated")
            )
        seen.add(module.category)

        vocabulary = SECTION_VOCABULARY.get(module.category)
        last_order = -1
        for section in module.sections:
            sloc = f"{loc}/{section.heading}"
            if section.order <= last_order:
                report.errors.append(
                    Issue(sloc, "BadSectionOrder", "section order not strictly increasing")
                )
            last_order = section.order
            if vocabulary is not None and section.heading not in vocabulary:
                report.warnings.append(
                    Issue(
                        sloc,
                        "UnknownHeading",
                        f"heading {section.heading!r} outside the {module.category} vocabulary",
                    )
                )
    return report


# --------------------------------------------------------------------------
# chunking

def chunk_article(article: Article) -> list[Chunk]:
    """One chunk per non-empty section (heading + body + evidence); empty
    sections are skipped. Deterministic ids ``<article_id>#<category>/<order>``.
    """
    chunks: list[Chunk] = []
    modules = sorted(
        article.modules, key=lambda m: _CATEGORY_ORDER.get(m.category, len(CATEGORIES))
    )
    for module in modules:
        for section in sorted(module.sections, key=lambda s: s.order):
            parts = [p for p in [section.heading, section.body, *section.evidence] if p]
            if not section.body and not section.evidence:
                continue
            text = "\n\n".join(parts)
            chunks.append(
                Chunk(
                    chunk_id=make_chunk_id(article.meta.article_id, module.category, section.order),
                    article_id=article.meta.article_id,
                    category=module.category,
                    heading=section.heading,
                    text=text,
                    token_count=len(lexindex.tokenize(text)),
                    sentence_count=count_sentences(text),
                    quantity_count=len(extraction.extract_quantities(text)),
                )
            )
    return chunks


# --------------------------------------------------------------------------
# wire shape

def article_to_dict(article: Article) -> dict:
    return {
        "article_id": article.meta.article_id,
        "title": article.meta.title,
        "abstract": article.meta.abstract,
        "authors": list(article.meta.authors),
        "journal": article.meta.journal,
        "year": article.meta.year,
        "doi": article.meta.doi,
        "modules": [
            {
                "category": m.category,
                "sections": [
                    {
                        "heading": s.heading,
                        "body": s.body,
                        "evidence": list(s.evidence),
                        "order": s.order,
                    }
                    for s in m.sections
                ],
            }
            for m in article.modules
        ],
    }


def article_from_dict(d: dict) -> Article:
    return Article(
        meta=ArticleMeta(
            article_id=d["article_id"],
            title=d.get("title", ""),
            abstract=d.get("abstract", ""),
            authors=list(d.get("authors", [])),
            journal=d.get("journal", ""),
            year=d.get("year"),
            doi=d.get("doi"),
        ),
        modules=[
            ModuleBlock(
                category=m["category"],
                sections=[
                    SectionUnit(
                        heading=s["heading"],
                        body=s["body"],
                        evidence=list(s.get("evidence", [])),
                        order=s["order"],
                    )
                    for s in m["sections"]
                ],
            )
            for m in d.get("modules", [])
        ],
    )
