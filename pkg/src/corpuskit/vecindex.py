"""Dense-vector axis: deterministic hashing embedder (offline default),
pluggable external embedding service, and exact L2 nearest-neighbor search.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import DimensionMismatch, EmbedderUnavailable
from .lexindex import tokenize

if TYPE_CHECKING:  # pragma: no cover
    from .docmodel import Chunk

DEFAULT_DIM = 256

INDEX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EmbedderSpec:
    kind: str = "hashing_default"  # or "external_service"
    dim: int = DEFAULT_DIM
    endpoint: str | None = None
    api_key: str | None = None

    def __post_init__(self):
        if self.kind not in ("hashing_default", "external_service"):
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


def embed_text(text: str, spec: EmbedderSpec = EmbedderSpec()) -> np.ndarray:
    """Embed text deterministically (hashing default) or via the external
    service. Hashing: token frequencies accumulated into hashed buckets,
    L2-normalized; empty text gives the zero vector.
    """
    if spec.kind == "external_service":
        return _embed_external(text, spec)
    vec = np.zeros(spec.dim, dtype=np.float64)
    for token in tokenize(text):
        vec[_bucket(token, spec.dim)] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def _embed_external(text: str, spec: EmbedderSpec) -> np.ndarray:
    import urllib.error
    import urllib.request

    if not spec.endpoint:
        raise EmbedderUnavailable("external embedder requires an endpoint")
    body = json.dumps({"text": text, "dim": spec.dim}).encode("utf-8")
    req = urllib.request.Request(
        spec.endpoint, data=body, headers={"Content-Type": "application/json"}
    )
    if spec.api_key:
        req.add_header("Authorization", f"Bearer {spec.api_key}")
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise EmbedderUnavailable(f"embedding service failed: {exc}") from exc
    vec = np.asarray(payload["vector"], dtype=np.float64)
    if vec.shape != (spec.dim,):
        raise DimensionMismatch(f"expected dim {spec.dim}, got {vec.shape}")
    return vec


@dataclass
class VectorIndex:
    dim: int = DEFAULT_DIM
    chunk_ids: list[str] = field(default_factory=list)
    matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, DEFAULT_DIM)))


def build(chunks: Iterable["Chunk"], spec: EmbedderSpec = EmbedderSpec()) -> VectorIndex:
    ordered = sorted(chunks, key=lambda c: c.chunk_id)
    vectors = [embed_text(c.text, spec) for c in ordered]
    matrix = np.vstack(vectors) if vectors else np.zeros((0, spec.dim))
    return VectorIndex(dim=spec.dim, chunk_ids=[c.chunk_id for c in ordered], matrix=matrix)


def knn(query_vec: np.ndarray, k: int, index: VectorIndex) -> list[tuple[str, float]]:
    """Exact k smallest L2 distances, ascending; ties broken by chunk id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not index.chunk_ids:
        return []
    if query_vec.shape != (index.dim,):
        raise DimensionMismatch(f"query dim {query_vec.shape} != index dim {index.dim}")
    dists = np.linalg.norm(index.matrix - query_vec, axis=1)
    ranked = sorted(zip(index.chunk_ids, dists.tolist()), key=lambda x: (x[1], x[0]))
    return ranked[:k]


def similarity(distance: float) -> float:
    """Map an L2 distance to a bounded similarity: 1 / (1 + d)."""
    if distance < 0:
        raise ValueError("distance must be >= 0")
    return 1.0 / (1.0 + distance)


def save_index(index: VectorIndex, path: str | Path) -> None:
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "dim": index.dim,
        "chunks": [[cid, vec] for cid, vec in zip(index.chunk_ids, index.matrix.tolist())],
    }
    Path(path).write_text(json.dumps(payload), "utf-8")


def load_index(path: str | Path) -> VectorIndex:
    payload = json.loads(Path(path).read_text("utf-8"))
    chunk_ids = [cid for cid, _ in payload["chunks"]]
    vectors = [vec for _, vec in payload["chunks"]]
    matrix = np.asarray(vectors, dtype=np.float64) if vectors else np.zeros((0, payload["dim"]))
    return VectorIndex(dim=payload["dim"], chunk_ids=chunk_ids, matrix=matrix)
