"""Mention-aware sentence vectors, concept centroids, and consistency re-ranking.

A backend turns a (tokens, mention) pair into a fixed-dimension vector.
``sent_rep`` first joins the mention tokens with "_" into one token, so a
backend always sees a single mention token. Two backends ship:

  * FallbackEncoder — deterministic feature hashing, d=256. Not semantically
    meaningful, but cheap, model-free, and stable across platforms; suitable
    for tests, demos, and CI.
  * PrecomputedVectorBackend — vectors read from a vector file, keyed by
    sentence_id (corpus records) or query ordinal (query files). This is the
    entry point for vectors produced by an external contextual model.

Vector file layout (little-endian):
    magic "TGVC" | u32 version | u32 dim | u64 count
    per record: u32 key length, key bytes, dim * f32
A TSV alternative (key<TAB>space-separated floats) is accepted on load.

Concept centroids are arithmetic means (accumulated in float64, stored as
float32) of the sentence vectors of every corpus record linked to the
concept. Consistency is the cosine between a mention's vector and a
centroid; all-zero vectors have cosine 0 by convention.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .corpus import Corpus
from .esa import ScoredConcept

_VEC_MAGIC = b"TGVC"
_VEC_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF


class UnknownConceptError(KeyError):
    """Requested concept has no stored representation."""


class MissingVectorError(KeyError):
    """Precomputed backend has no vector under the requested key."""


class EncoderBackend(Protocol):
    dim: int

    def encode(
        self, tokens: Sequence[str], mention_index: int, key: str | None = None
    ) -> np.ndarray:
        """Vector for a mention-joined token sequence. Must be deterministic."""
        ...


def join_mention(tokens: Sequence[str], span: tuple[int, int]) -> tuple[list[str], int]:
    """Replace the mention span by one "_"-joined token; returns its index."""
    start, end = span
    if not (0 <= start < end <= len(tokens)):
        raise ValueError(f"mention span ({start}, {end}) out of range for {len(tokens)} tokens")
    joined = list(tokens[:start])
    joined.append("_".join(tokens[start:end]))
    joined.extend(tokens[end:])
    return joined, start


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64_MASK
    return h


class FallbackEncoder:
    """Signed feature-hashing encoder, fully deterministic.

    Each casefolded token hashes (FNV-1a, 64-bit) to a coordinate (hash mod
    dim) and a sign (top bit set -> negative). Tokens are weighted by
    1 / (1 + distance from the mention token); the mention token itself
    weighs 2. The signed weighted sum is L2-normalized.
    """

    dim = 256

    def encode(
        self, tokens: Sequence[str], mention_index: int, key: str | None = None
    ) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for i, tok in enumerate(tokens):
            h = fnv1a_64(tok.casefold().encode("utf-8"))
            sign = -1.0 if h >> 63 else 1.0
            weight = 2.0 if i == mention_index else 1.0 / (1.0 + abs(i - mention_index))
            vec[h % self.dim] += sign * weight
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return vec.astype(np.float32)


class PrecomputedVectorBackend:
    """Serves vectors loaded from a vector file; requires a lookup key."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        if not vectors:
            raise ValueError("no vectors supplied")
        dims = {v.shape for v in vectors.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent vector shapes: {sorted(dims)}")
        self._vectors = {k: np.asarray(v, dtype=np.float32) for k, v in vectors.items()}
        self.dim = next(iter(self._vectors.values())).shape[0]

    @classmethod
    def from_file(cls, path: str | Path) -> "PrecomputedVectorBackend":
        return cls(load_vectors(path))

    def encode(
        self, tokens: Sequence[str], mention_index: int, key: str | None = None
    ) -> np.ndarray:
        if key is None:
            raise MissingVectorError("precomputed backend needs a lookup key")
        try:
            return self._vectors[key]
        except KeyError:
            raise MissingVectorError(key) from None


def sent_rep(
    backend: EncoderBackend,
    tokens: Sequence[str],
    span: tuple[int, int],
    key: str | None = None,
) -> np.ndarray:
    """Mention-aware sentence vector: join the mention, then encode."""
    joined, idx = join_mention(tokens, span)
    return backend.encode(joined, idx, key=key)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(av, bv) / (na * nb))


@dataclass
class ConceptRepStore:
    """Per-concept centroid vectors with contributing-sentence counts."""

    reps: dict[str, np.ndarray]
    support: dict[str, int]
    dim: int

    def __contains__(self, concept: str) -> bool:
        return concept in self.reps

    def __len__(self) -> int:
        return len(self.reps)


def build_concept_reps(backend: EncoderBackend, corpus: Corpus) -> ConceptRepStore:
    if not corpus.by_concept:
        raise ValueError("corpus has no concept-linked records")
    reps: dict[str, np.ndarray] = {}
    support: dict[str, int] = {}
    for concept, indices in corpus.by_concept.items():
        total = np.zeros(backend.dim, dtype=np.float64)
        for i in indices:
            rec = corpus.records[i]
            total += sent_rep(backend, rec.tokens, rec.mention_span, key=rec.sentence_id)
        reps[concept] = (total / len(indices)).astype(np.float32)
        support[concept] = len(indices)
    return ConceptRepStore(reps=reps, support=support, dim=backend.dim)


def consistency(
    concept: str,
    tokens: Sequence[str],
    span: tuple[int, int],
    backend: EncoderBackend,
    store: ConceptRepStore,
    key: str | None = None,
) -> float:
    """Cosine between the mention's vector and the concept centroid."""
    if concept not in store.reps:
        raise UnknownConceptError(concept)
    return cosine(sent_rep(backend, tokens, span, key=key), store.reps[concept])


def rerank(
    candidates: Sequence[ScoredConcept],
    tokens: Sequence[str],
    span: tuple[int, int],
    backend: EncoderBackend,
    store: ConceptRepStore,
    limit: int,
    key: str | None = None,
    trace: list[str] | None = None,
) -> list[ScoredConcept]:
    """Top ``limit`` candidates by (consistency desc, candidate rank asc).

    Candidates with no stored centroid are skipped (noted in the trace).
    """
    if limit < 1:
        raise ValueError(f"re-rank limit must be >= 1, got {limit}")
    if not candidates:
        return []
    query_vec = sent_rep(backend, tokens, span, key=key)
    scored: list[tuple[str, float, int]] = []
    for rank, cand in enumerate(candidates):
        rep = store.reps.get(cand.concept)
        if rep is None:
            if trace is not None:
                trace.append(f"rerank: skipped {cand.concept} (no stored rep)")
            continue
        scored.append((cand.concept, cosine(query_vec, rep), rank))
    scored.sort(key=lambda item: (-item[1], item[2]))
    return [ScoredConcept(c, score) for c, score, _ in scored[:limit]]


# --- vector files ------------------------------------------------------------


class VectorFormatError(ValueError):
    """The vector file is not readable."""


def save_vectors(vectors: Mapping[str, np.ndarray], path: str | Path) -> None:
    if not vectors:
        raise ValueError("no vectors to save")
    dim = len(next(iter(vectors.values())))
    with open(path, "wb") as fh:
        fh.write(_VEC_MAGIC)
        fh.write(struct.pack("<IIQ", _VEC_VERSION, dim, len(vectors)))
        for k in sorted(vectors):
            vec = np.asarray(vectors[k], dtype="<f4")
            if vec.shape != (dim,):
                raise ValueError(f"vector {k!r} has shape {vec.shape}, expected ({dim},)")
            data = k.encode("utf-8")
            fh.write(struct.pack("<I", len(data)))
            fh.write(data)
            fh.write(vec.tobytes())


def load_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Load a vector file; binary container or TSV, sniffed by magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(len(_VEC_MAGIC))
        if head != _VEC_MAGIC:
            return _load_vectors_tsv(path)
        version, dim, count = struct.unpack("<IIQ", fh.read(16))
        if version != _VEC_VERSION:
            raise VectorFormatError(f"{path}: unsupported vector file version {version}")
        vectors: dict[str, np.ndarray] = {}
        for _ in range(count):
            raw = fh.read(4)
            if len(raw) != 4:
                raise VectorFormatError(f"{path}: truncated vector file")
            (klen,) = struct.unpack("<I", raw)
            key = fh.read(klen).decode("utf-8")
            buf = fh.read(4 * dim)
            if len(buf) != 4 * dim:
                raise VectorFormatError(f"{path}: truncated vector file")
            vectors[key] = np.frombuffer(buf, dtype="<f4").copy()
        return vectors


def _load_vectors_tsv(path: str | Path) -> dict[str, np.ndarray]:
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                key, values = line.rstrip("\n").split("\t")
                vec = np.array([float(x) for x in values.split()], dtype=np.float32)
            except ValueError:
                raise VectorFormatError(f"{path}:{line_no}: bad vector line") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise VectorFormatError(
                    f"{path}:{line_no}: dimension {len(vec)} != {dim}"
                )
            vectors[key] = vec
    if not vectors:
        raise VectorFormatError(f"{path}: empty vector file")
    return vectors


def save_concept_reps(store: ConceptRepStore, path: str | Path) -> None:
    """Persist a rep store: vector file plus a `<path>.support` count TSV."""
    save_vectors(store.reps, path)
    support_path = Path(str(path) + ".support")
    with open(support_path, "w", encoding="utf-8") as fh:
        for concept in sorted(store.support):
            fh.write(f"{concept}\t{store.support[concept]}\n")


def load_concept_reps(path: str | Path) -> ConceptRepStore:
    reps = load_vectors(path)
    support_path = Path(str(path) + ".support")
    support: dict[str, int] = {}
    if support_path.exists():
        with open(support_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    concept, count = line.rstrip("\n").split("\t")
                    support[concept] = int(count)
    else:
        support = {c: 1 for c in reps}
    dim = len(next(iter(reps.values())))
    return ConceptRepStore(reps=reps, support=support, dim=dim)
