"""Inverted word-to-concept association index and candidate generation.

Each corpus sentence is treated as one document. A word's association with
a concept is the sum of the word's TF-IDF values over that concept's
sentences; querying aggregates the per-word association lists over all
sentence tokens and returns the top candidates.

Index file layout (little-endian, versioned):
    magic "TGESAIDX" | u32 version | u64 n_sentences
    u64 n_df        | per word: u32 len, utf-8 bytes, u64 count
    u64 n_titles    | per title: u32 len, utf-8 bytes   (id = position)
    u64 n_postings  | per word: u32 len, utf-8 bytes, u64 n_pairs,
                      pairs of (u32 concept_id, f64 score)
Words and titles are written sorted, so serialization is deterministic and
round-trips bit-exactly.
"""

from __future__ import annotations

import math
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

from .corpus import Corpus, CorpusStats, MentionSentence, index_word

_MAGIC = b"TGESAIDX"
_VERSION = 1


class IndexFormatError(ValueError):
    """The index file is not a readable index container."""


class ScoredConcept(NamedTuple):
    concept: str
    score: float


@dataclass
class EsaIndex:
    """Word -> ranked (concept, score) postings plus corpus statistics."""

    postings: dict[str, list[ScoredConcept]]
    n_sentences: int
    df: dict[str, int]


def tfidf(word: str, sentence: MentionSentence, stats: CorpusStats) -> float:
    """tf(word, sentence) * ln(n_sentences / df(word)); 0 for unseen words.

    tf is the raw casefolded count; idf is unsmoothed.
    """
    w = index_word(word)
    n_df = stats.df.get(w, 0)
    if n_df == 0:
        return 0.0
    tf = sum(1 for t in sentence.tokens if t.casefold() == w)
    if tf == 0:
        return 0.0
    return tf * math.log(stats.n_sentences / n_df)


def build_esa_index(corpus: Corpus) -> EsaIndex:
    """Accumulate word-concept association scores over concept-linked records.

    Records without a concept contribute to df stats only, never to postings.
    Zero scores (ubiquitous words with vanishing idf) are not stored.
    """
    stats = corpus.stats
    acc: dict[str, dict[str, float]] = {}
    for rec in corpus.records:
        if rec.concept is None:
            continue
        counts = Counter(t.casefold() for t in rec.tokens)
        for w, tf in counts.items():
            idf = math.log(stats.n_sentences / stats.df[w])
            if idf <= 0.0:
                continue
            acc.setdefault(w, {})
            acc[w][rec.concept] = acc[w].get(rec.concept, 0.0) + tf * idf
    postings = {
        w: sorted(
            (ScoredConcept(c, s) for c, s in by_concept.items()),
            key=lambda sc: (-sc.score, sc.concept),
        )
        for w, by_concept in acc.items()
    }
    return EsaIndex(postings=postings, n_sentences=stats.n_sentences, df=dict(stats.df))


def esa_candidates(index: EsaIndex, tokens: Sequence[str], limit: int) -> list[ScoredConcept]:
    """Aggregate per-token association lists and keep the top ``limit``.

    Every sentence token contributes, the mention's own tokens included;
    repeated tokens contribute once per occurrence. Ties break by ascending
    concept id. Returns [] when no token is indexed.
    """
    if limit < 1:
        raise ValueError(f"candidate limit must be >= 1, got {limit}")
    weights: dict[str, float] = {}
    for tok in tokens:
        for concept, score in index.postings.get(index_word(tok), ()):
            weights[concept] = weights.get(concept, 0.0) + score
    ranked = sorted(weights.items(), key=lambda item: (-item[1], item[0]))
    return [ScoredConcept(c, s) for c, s in ranked[:limit]]


# --- serialization -----------------------------------------------------------


def _write_str(fh, text: str) -> None:
    data = text.encode("utf-8")
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise IndexFormatError("truncated index file")
    return data


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", _read_exact(fh, 4))
    return _read_exact(fh, n).decode("utf-8")


def save_esa_index(index: EsaIndex, path: str | Path) -> None:
    concepts = sorted({sc.concept for lst in index.postings.values() for sc in lst})
    concept_ids = {c: i for i, c in enumerate(concepts)}
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", index.n_sentences))
        fh.write(struct.pack("<Q", len(index.df)))
        for w in sorted(index.df):
            _write_str(fh, w)
            fh.write(struct.pack("<Q", index.df[w]))
        fh.write(struct.pack("<Q", len(concepts)))
        for c in concepts:
            _write_str(fh, c)
        fh.write(struct.pack("<Q", len(index.postings)))
        for w in sorted(index.postings):
            _write_str(fh, w)
            pairs = index.postings[w]
            fh.write(struct.pack("<Q", len(pairs)))
            for concept, score in pairs:
                fh.write(struct.pack("<Id", concept_ids[concept], score))


def load_esa_index(path: str | Path) -> EsaIndex:
    with open(path, "rb") as fh:
        if _read_exact(fh, len(_MAGIC)) != _MAGIC:
            raise IndexFormatError(f"{path}: not an index file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != _VERSION:
            raise IndexFormatError(f"{path}: unsupported index version {version}")
        (n_sentences,) = struct.unpack("<Q", _read_exact(fh, 8))
        (n_df,) = struct.unpack("<Q", _read_exact(fh, 8))
        df: dict[str, int] = {}
        for _ in range(n_df):
            w = _read_str(fh)
            (df[w],) = struct.unpack("<Q", _read_exact(fh, 8))
        (n_titles,) = struct.unpack("<Q", _read_exact(fh, 8))
        titles = [_read_str(fh) for _ in range(n_titles)]
        (n_postings,) = struct.unpack("<Q", _read_exact(fh, 8))
        postings: dict[str, list[ScoredConcept]] = {}
        for _ in range(n_postings):
            w = _read_str(fh)
            (n_pairs,) = struct.unpack("<Q", _read_exact(fh, 8))
            lst = []
            for _ in range(n_pairs):
                cid, score = struct.unpack("<Id", _read_exact(fh, 12))
                lst.append(ScoredConcept(titles[cid], score))
            postings[w] = lst
    return EsaIndex(postings=postings, n_sentences=n_sentences, df=df)
