"""Shared vocabularies: attribute synonyms, material terms, stopwords.

The synonym table and stopword list ship as editable text assets; everything
here is loaded once at import and treated as immutable.
"""

from __future__ import annotations

import re
from importlib import resources

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _asset_text(name: str) -> str:
    return resources.files("corpuskit.assets").joinpath(name).read_text("utf-8")


def load_synonyms(text: str | None = None) -> dict[str, str]:
    """Parse the synonym asset: one ``surface -> normalized`` mapping per line."""
    if text is None:
        text = _asset_text("attribute_synonyms.txt")
    table: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        surface, _, target = line.partition("->")
        table[surface.strip().lower()] = target.strip()
    return table


def load_stopwords(text: str | None = None) -> frozenset[str]:
    if text is None:
        text = _asset_text("stopwords.txt")
    return frozenset(w.strip().lower() for w in text.split() if w.strip())


DEFAULT_SYNONYMS: dict[str, str] = load_synonyms()
STOPWORDS: frozenset[str] = load_stopwords()

# Material terms recognised by the baseline entity extractor, as lowercase
# token tuples (multi-token terms match token n-grams).
DEFAULT_MATERIALS: tuple[tuple[str, ...], ...] = (
    ("h", "bn"),
    ("bnns",),
    ("bn",),
    ("tpu",),
    ("pvp",),
    ("urea",),
    ("zro2",),
    ("ipa",),
    ("mwcnt",),
    ("sucrose",),
    ("cmc",),
    ("naoh",),
    ("epoxy",),
    ("pdms",),
)


def normalize_attribute(surface: str, synonyms: dict[str, str] | None = None) -> str:
    """Map a surface attribute phrase to its normalized name.

    Unknown phrases fall back to lowercased, underscore-joined tokens, which
    keeps normalization idempotent.
    """
    table = DEFAULT_SYNONYMS if synonyms is None else synonyms
    key = " ".join(_TOKEN_RE.findall(surface.lower()))
    if key in table:
        return table[key]
    return "_".join(key.split())


def attribute_token_forms(synonyms: dict[str, str] | None = None) -> dict[tuple[str, ...], str]:
    """Surface forms of all attributes as token tuples, for n-gram matching."""
    table = DEFAULT_SYNONYMS if synonyms is None else synonyms
    forms: dict[tuple[str, ...], str] = {}
    for surface, name in table.items():
        toks = tuple(_TOKEN_RE.findall(surface))
        if toks:
            forms[toks] = name
        # normalized names are themselves valid surfaces
        own = tuple(_TOKEN_RE.findall(name.replace("_", " ")))
        if own:
            forms.setdefault(own, name)
    return forms
