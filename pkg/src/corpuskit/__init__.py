"""corpuskit: a lightly structured article database with composite retrieval
(semantic + lexical + attribute-value), grounded RAG utilities, and an
experience-distillation loop. Offline-deterministic by default; LLM-backed
steps are pluggable externals."""

__version__ = "0.1.0"

from .docmodel import (  # noqa: F401
    Article,
    ArticleMeta,
    Chunk,
    ModuleBlock,
    SectionUnit,
    ValidationReport,
    chunk_article,
    parse_article,
    serialize_article,
    validate_schema,
)
from .extraction import (  # noqa: F401
    Entity,
    KGEdge,
    KGNode,
    Quantity,
    build_graph,
    compare_quantity_sets,
    extract_entities,
    extract_quantities,
    normalize_quantity,
)
from .fusion import IndexBundle, RetrievalResult, Weights, retrieve  # noqa: F401
from .querykit import CompositeQuery, preprocess  # noqa: F401
from .ragkit import GeneratorSpec, assemble_context, build_prompt, generate, verify_grounding  # noqa: F401
from .store import Store  # noqa: F401
