"""Surface-form to concept prior probabilities.

The prior for a surface string is the empirical frequency with which that
exact mention surface links to each concept in the corpus. Lookup tries the
exact surface first and falls back to a casefolded match (counts aggregated
across case variants), which recovers sentence-initial capitalization.

Persisted as TSV: surface<TAB>concept<TAB>count. Probabilities are derived
from counts on load, so round-trips are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, canonicalize_concept, normalize_token


class PriorFormatError(ValueError):
    """The priors file is not readable."""


@dataclass
class PriorTable:
    """Per-surface concept counts with derived probability distributions."""

    counts: dict[str, dict[str, int]]
    totals: dict[str, int] = field(init=False)
    _folded: dict[str, dict[str, int]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.totals = {s: sum(by_c.values()) for s, by_c in self.counts.items()}
        folded: dict[str, dict[str, int]] = {}
        for surface, by_concept in self.counts.items():
            bucket = folded.setdefault(surface.casefold(), {})
            for concept, n in by_concept.items():
                bucket[concept] = bucket.get(concept, 0) + n
        self._folded = folded

    def distribution(self, surface: str) -> list[tuple[str, float]]:
        """(concept, probability) pairs sorted by probability desc, concept asc."""
        by_concept = self.counts.get(surface)
        if not by_concept:
            return []
        total = self.totals[surface]
        return [
            (c, n / total)
            for c, n in sorted(by_concept.items(), key=lambda item: (-item[1], item[0]))
        ]

    def __len__(self) -> int:
        return len(self.counts)


def build_priors(corpus: Corpus) -> PriorTable:
    """Count surface -> concept links over the corpus' concept-bearing records."""
    counts: dict[str, dict[str, int]] = {}
    for rec in corpus.records:
        if rec.concept is None:
            continue
        surface = rec.surface()
        bucket = counts.setdefault(surface, {})
        bucket[rec.concept] = bucket.get(rec.concept, 0) + 1
    return PriorTable(counts)


def _argmax(by_concept: dict[str, int]) -> tuple[str, float]:
    total = sum(by_concept.values())
    concept, n = min(by_concept.items(), key=lambda item: (-item[1], item[0]))
    return concept, n / total


def surface_concept(table: PriorTable, mention_tokens) -> tuple[str, float] | None:
    """Most probable concept for a mention surface, or None when unseen.

    Ties break to the lexicographically smaller concept id.
    """
    normalized = [normalize_token(t) for t in mention_tokens]
    surface = " ".join(t for t in normalized if t)
    if not surface:
        return None
    by_concept = table.counts.get(surface)
    if not by_concept:
        by_concept = table._folded.get(surface.casefold())
    if not by_concept:
        return None
    return _argmax(by_concept)


def save_priors(table: PriorTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for surface in sorted(table.counts):
            if "\t" in surface or "\n" in surface:
                raise PriorFormatError(f"surface {surface!r} not representable in TSV")
            for concept in sorted(table.counts[surface]):
                fh.write(f"{surface}\t{concept}\t{table.counts[surface][concept]}\n")


def load_priors(path: str | Path) -> PriorTable:
    counts: dict[str, dict[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise PriorFormatError(
                    f"line {line_no}: expected surface<TAB>concept<TAB>count"
                )
            surface, concept, raw_count = parts
            concept = canonicalize_concept(concept)
            try:
                n = int(raw_count)
            except ValueError:
                raise PriorFormatError(f"line {line_no}: bad count {raw_count!r}") from None
            if n <= 0:
                raise PriorFormatError(f"line {line_no}: count must be positive")
            bucket = counts.setdefault(surface, {})
            if concept in bucket:
                raise PriorFormatError(
                    f"line {line_no}: duplicate row for ({surface!r}, {concept!r})"
                )
            bucket[concept] = n
    return PriorTable(counts)
