"""Loading and validation of mention corpora, concept-type tables, and query files.

File formats:

  Corpus / query lines (UTF-8, one JSON object per line):
      {"sentence_id": str, "tokens": [str],
       "mention": {"start": int, "end": int}, "concept": str|null}
  Query lines may additionally carry "gold_types": [str].

  Concept-type table (UTF-8 TSV):
      concept<TAB>comma-separated primitive type paths
  Lines starting with "#" are comments.

Corpora arrive pre-tokenized; this module never re-tokenizes, so mention
spans stay exact. Tokens are NFC-normalized and stripped on load; tokens
that normalize to the empty string are dropped and the mention span is
remapped over the surviving tokens.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


class CorpusParseError(ValueError):
    """A line could not be decoded into a record."""


class CorpusValidationError(ValueError):
    """A decoded record violates a corpus invariant."""


def normalize_token(raw: str) -> str:
    """NFC-normalize and strip surrounding whitespace; case is preserved.

    Callers drop tokens that come back empty.
    """
    return unicodedata.normalize("NFC", raw).strip()


def index_word(token: str) -> str:
    """Casefolded form of a token, the single key used for df stats and the
    inverted index."""
    return normalize_token(token).casefold()


def canonicalize_concept(raw: str) -> str:
    """Canonical concept identifier: NFC, stripped, spaces replaced by
    underscores. No redirect resolution is attempted."""
    return unicodedata.normalize("NFC", raw).strip().replace(" ", "_")


@dataclass(frozen=True)
class MentionSentence:
    """A tokenized sentence holding exactly one mention span."""

    sentence_id: str
    tokens: tuple[str, ...]
    mention_span: tuple[int, int]
    concept: str | None = None

    def __post_init__(self) -> None:
        start, end = self.mention_span
        if not self.tokens:
            raise CorpusValidationError(
                f"sentence {self.sentence_id!r}: no tokens after normalization"
            )
        if any(not t for t in self.tokens):
            raise CorpusValidationError(
                f"sentence {self.sentence_id!r}: empty token"
            )
        if not (0 <= start < end <= len(self.tokens)):
            raise CorpusValidationError(
                f"sentence {self.sentence_id!r}: mention span ({start}, {end}) "
                f"out of range for {len(self.tokens)} tokens"
            )

    @property
    def mention_tokens(self) -> tuple[str, ...]:
        start, end = self.mention_span
        return self.tokens[start:end]

    def surface(self) -> str:
        """Mention surface string: tokens joined by single spaces."""
        return " ".join(self.mention_tokens)


@dataclass(frozen=True)
class CorpusStats:
    """Sentence count and per-word document frequency (words casefolded)."""

    n_sentences: int
    df: dict[str, int]


@dataclass
class Corpus:
    records: list[MentionSentence]
    by_concept: dict[str, list[int]] = field(init=False)
    stats: CorpusStats = field(init=False)

    def __post_init__(self) -> None:
        by_concept: dict[str, list[int]] = {}
        df: dict[str, int] = {}
        seen_ids: set[str] = set()
        for i, rec in enumerate(self.records):
            if rec.sentence_id in seen_ids:
                raise CorpusValidationError(
                    f"duplicate sentence_id {rec.sentence_id!r}"
                )
            seen_ids.add(rec.sentence_id)
            if rec.concept is not None:
                by_concept.setdefault(rec.concept, []).append(i)
            for w in {t.casefold() for t in rec.tokens}:
                df[w] = df.get(w, 0) + 1
        self.by_concept = by_concept
        self.stats = CorpusStats(n_sentences=len(self.records), df=df)

    def __len__(self) -> int:
        return len(self.records)


def sentences_of_concept(corpus: Corpus, concept: str) -> list[MentionSentence]:
    """All records linked to ``concept``, in corpus order."""
    return [corpus.records[i] for i in corpus.by_concept.get(concept, [])]


def _remap_span(normalized: list[str], span: tuple[int, int]) -> tuple[list[str], tuple[int, int]]:
    """Drop empty tokens and shift the span over the surviving ones."""
    kept: list[str] = []
    new_start = new_end = 0
    for i, tok in enumerate(normalized):
        if i == span[0]:
            new_start = len(kept)
        if i == span[1]:
            new_end = len(kept)
        if tok:
            kept.append(tok)
    if span[1] == len(normalized):
        new_end = len(kept)
    return kept, (new_start, new_end)


def _record_from_obj(obj: object, line_no: int) -> tuple[MentionSentence, list[str] | None]:
    if not isinstance(obj, dict):
        raise CorpusParseError(f"line {line_no}: record is not a JSON object")
    try:
        sentence_id = obj["sentence_id"]
        raw_tokens = obj["tokens"]
        mention = obj["mention"]
        start, end = mention["start"], mention["end"]
    except (KeyError, TypeError) as exc:
        raise CorpusParseError(f"line {line_no}: missing field ({exc})") from None
    if (
        not isinstance(sentence_id, str)
        or not isinstance(raw_tokens, list)
        or not all(isinstance(t, str) for t in raw_tokens)
        or not isinstance(start, int)
        or not isinstance(end, int)
        or isinstance(start, bool)
        or isinstance(end, bool)
    ):
        raise CorpusParseError(f"line {line_no}: field has wrong type")
    if not (0 <= start < end <= len(raw_tokens)):
        raise CorpusValidationError(
            f"sentence {sentence_id!r}: mention span ({start}, {end}) "
            f"out of range for {len(raw_tokens)} tokens"
        )
    concept = obj.get("concept")
    if concept is not None:
        if not isinstance(concept, str):
            raise CorpusParseError(f"line {line_no}: concept must be a string or null")
        concept = canonicalize_concept(concept)

    normalized = [normalize_token(t) for t in raw_tokens]
    kept, span = _remap_span(normalized, (start, end))
    if span[0] == span[1]:
        raise CorpusValidationError(
            f"sentence {sentence_id!r}: mention tokens all normalize to empty"
        )
    record = MentionSentence(
        sentence_id=sentence_id,
        tokens=tuple(kept),
        mention_span=span,
        concept=concept,
    )

    gold = obj.get("gold_types")
    if gold is not None:
        if not isinstance(gold, list) or not all(isinstance(t, str) for t in gold):
            raise CorpusParseError(f"line {line_no}: gold_types must be a list of strings")
        gold = [t.strip().upper() for t in gold]
        if any(not t for t in gold):
            raise CorpusValidationError(
                f"sentence {sentence_id!r}: empty gold type path"
            )
    return record, gold


def _iter_lines(path: str | Path) -> Iterable[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip():
                yield line_no, line


def load_corpus(path: str | Path) -> Corpus:
    """Load a corpus file, one JSON record per line.

    Raises CorpusParseError (naming the line) on undecodable lines and
    CorpusValidationError (naming the sentence) on invariant violations.
    """
    records: list[MentionSentence] = []
    for line_no, line in _iter_lines(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusParseError(f"line {line_no}: invalid JSON ({exc.msg})") from None
        record, _ = _record_from_obj(obj, line_no)
        records.append(record)
    return Corpus(records)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus back in the line format; reloading yields an equal corpus."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus.records:
            fh.write(record_to_json(rec) + "\n")


def record_to_json(rec: MentionSentence, gold_types: Iterable[str] | None = None) -> str:
    obj: dict[str, object] = {
        "sentence_id": rec.sentence_id,
        "tokens": list(rec.tokens),
        "mention": {"start": rec.mention_span[0], "end": rec.mention_span[1]},
        "concept": rec.concept,
    }
    if gold_types is not None:
        obj["gold_types"] = sorted(gold_types)
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


@dataclass(frozen=True)
class QueryMention:
    """A query record: a mention in context, optionally with gold types."""

    sentence: MentionSentence
    gold_types: frozenset[str] | None = None


def parse_queries(lines: Iterable[str], require_gold: bool = False) -> list[QueryMention]:
    """Parse query/gold mention lines (corpus line format + optional gold_types).

    Gold type paths are uppercased; target-type comparison is case-insensitive
    with uppercase as the canonical form.
    """
    queries: list[QueryMention] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusParseError(f"line {line_no}: invalid JSON ({exc.msg})") from None
        record, gold = _record_from_obj(obj, line_no)
        if require_gold and not gold:
            raise CorpusValidationError(
                f"sentence {record.sentence_id!r}: gold_types missing or empty"
            )
        queries.append(
            QueryMention(record, frozenset(gold) if gold is not None else None)
        )
    return queries


def load_queries(path: str | Path, require_gold: bool = False) -> list[QueryMention]:
    with open(path, encoding="utf-8") as fh:
        return parse_queries(fh, require_gold=require_gold)


@dataclass(frozen=True)
class ConceptTypeTable:
    """Map from concept to its set of primitive type paths (lowercased)."""

    entries: dict[str, frozenset[str]]

    def types_of(self, concept: str) -> frozenset[str]:
        return self.entries.get(concept, frozenset())

    def __contains__(self, concept: str) -> bool:
        return concept in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def load_concept_types(path: str | Path) -> ConceptTypeTable:
    """Load the concept -> primitive types TSV.

    Types are lowercased and deduplicated. The table may mention concepts
    absent from any corpus.
    """
    entries: dict[str, frozenset[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise CorpusParseError(
                    f"line {line_no}: expected concept<TAB>types, got {len(parts)} columns"
                )
            concept = canonicalize_concept(parts[0])
            if not concept:
                raise CorpusParseError(f"line {line_no}: empty concept")
            if concept in entries:
                raise CorpusValidationError(
                    f"line {line_no}: duplicate concept {concept!r}"
                )
            types: set[str] = set()
            for item in parts[1].split(","):
                item = item.strip()
                if not item:
                    continue
                if not item.startswith("/") or any(c.isspace() for c in item):
                    raise CorpusValidationError(
                        f"line {line_no}: bad primitive type {item!r} "
                        f"(must start with '/' and contain no whitespace)"
                    )
                types.add(item.lower())
            entries[concept] = frozenset(types)
    return ConceptTypeTable(entries)


def save_concept_types(table: ConceptTypeTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for concept in sorted(table.entries):
            fh.write(f"{concept}\t{','.join(sorted(table.entries[concept]))}\n")
