"""Typing metrics, coverage analysis, and the nearest-neighbor type baseline.

All metrics operate on aligned sequences of gold and predicted target-type
sets. Strict accuracy demands exact set equality. Mention-level macro
scores average per-mention overlap ratios; micro scores pool the overlap
counts. The per-type variants tabulate, for each type t, the number of
mentions with gold type t, predicted type t, and correctly predicted type t.

A mention with an empty predicted set contributes 0 to macro precision
(gold sets are never empty).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Collection, NamedTuple, Sequence, TypeVar

import numpy as np

from .corpus import ConceptTypeTable, Corpus
from .encoder import EncoderBackend, cosine, sent_rep
from .typedefs import TypeDefinition, apply_type_map

T = TypeVar("T")


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


def _f1(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if (p + r) > 0.0 else 0.0


def _check_aligned(golds: Sequence[Collection[str]], preds: Sequence[Collection[str]]) -> None:
    if len(golds) != len(preds):
        raise ValueError(f"{len(golds)} gold mentions vs {len(preds)} predictions")
    if not golds:
        raise ValueError("no mentions to score")
    for i, g in enumerate(golds):
        if not g:
            raise ValueError(f"mention {i}: empty gold type set")


def strict_accuracy(golds: Sequence[Collection[str]], preds: Sequence[Collection[str]]) -> float:
    """Fraction of mentions whose predicted set equals the gold set exactly."""
    _check_aligned(golds, preds)
    hits = sum(1 for g, p in zip(golds, preds) if set(g) == set(p))
    return hits / len(golds)


def macro_prf(golds: Sequence[Collection[str]], preds: Sequence[Collection[str]]) -> PRF:
    """Mention-averaged overlap precision/recall."""
    _check_aligned(golds, preds)
    p_sum = r_sum = 0.0
    for g, p in zip(golds, preds):
        gset, pset = set(g), set(p)
        overlap = len(gset & pset)
        p_sum += overlap / len(pset) if pset else 0.0
        r_sum += overlap / len(gset)
    precision = p_sum / len(golds)
    recall = r_sum / len(golds)
    return PRF(precision, recall, _f1(precision, recall))


def micro_prf(golds: Sequence[Collection[str]], preds: Sequence[Collection[str]]) -> PRF:
    """Pooled overlap precision/recall."""
    _check_aligned(golds, preds)
    overlap = sum(len(set(g) & set(p)) for g, p in zip(golds, preds))
    pred_total = sum(len(set(p)) for p in preds)
    gold_total = sum(len(set(g)) for g in golds)
    precision = overlap / pred_total if pred_total else 0.0
    recall = overlap / gold_total if gold_total else 0.0
    return PRF(precision, recall, _f1(precision, recall))


def per_type_counts(
    golds: Sequence[Collection[str]], preds: Sequence[Collection[str]]
) -> dict[str, tuple[int, int, int]]:
    """Per type: (gold mentions, predicted mentions, correctly predicted)."""
    _check_aligned(golds, preds)
    tallies: dict[str, list[int]] = {}
    for g, p in zip(golds, preds):
        gset, pset = set(g), set(p)
        for t in gset | pset:
            row = tallies.setdefault(t, [0, 0, 0])
            if t in gset:
                row[0] += 1
            if t in pset:
                row[1] += 1
            if t in gset and t in pset:
                row[2] += 1
    return {t: (row[0], row[1], row[2]) for t, row in sorted(tallies.items())}


def per_type_prf(
    golds: Sequence[Collection[str]],
    preds: Sequence[Collection[str]],
    mode: str,
) -> PRF:
    """Type-level scores from the per-type tabulation.

    macro: each type's ratio is weighted by its share of gold mentions;
    types never predicted (or never gold, for recall) contribute 0.
    micro: ratios of pooled counts.
    """
    counts = per_type_counts(golds, preds)
    gold_total = sum(g for g, _, _ in counts.values())
    if mode == "macro":
        precision = sum(
            (c / p) * (g / gold_total) for g, p, c in counts.values() if p > 0
        )
        recall = sum(
            (c / g) * (g / gold_total) for g, p, c in counts.values() if g > 0
        )
    elif mode == "micro":
        pred_total = sum(p for _, p, _ in counts.values())
        correct_total = sum(c for _, _, c in counts.values())
        precision = correct_total / pred_total if pred_total else 0.0
        recall = correct_total / gold_total if gold_total else 0.0
    else:
        raise ValueError(f"mode must be 'macro' or 'micro', got {mode!r}")
    return PRF(precision, recall, _f1(precision, recall))


@dataclass(frozen=True)
class MetricsReport:
    strict_acc: float
    macro: PRF
    micro: PRF
    per_type_macro: PRF
    per_type_micro: PRF
    n_mentions: int

    def to_json_dict(self) -> dict:
        def prf(x: PRF) -> dict:
            return {"precision": x.precision, "recall": x.recall, "f1": x.f1}

        return {
            "n_mentions": self.n_mentions,
            "strict_acc": self.strict_acc,
            "macro": prf(self.macro),
            "micro": prf(self.micro),
            "per_type_macro": prf(self.per_type_macro),
            "per_type_micro": prf(self.per_type_micro),
        }

    def format_table(self) -> str:
        rows = [
            ("strict accuracy", f"{self.strict_acc:.4f}", "", ""),
            ("", "P", "R", "F1"),
            ("macro", *(f"{v:.4f}" for v in self.macro)),
            ("micro", *(f"{v:.4f}" for v in self.micro)),
            ("per-type macro", *(f"{v:.4f}" for v in self.per_type_macro)),
            ("per-type micro", *(f"{v:.4f}" for v in self.per_type_micro)),
        ]
        width = max(len(r[0]) for r in rows)
        lines = [f"mentions: {self.n_mentions}"]
        for name, a, b, c in rows:
            lines.append(f"{name:<{width}}  {a:>8} {b:>8} {c:>8}".rstrip())
        return "\n".join(lines)


def compute_report(
    golds: Sequence[Collection[str]], preds: Sequence[Collection[str]]
) -> MetricsReport:
    return MetricsReport(
        strict_acc=strict_accuracy(golds, preds),
        macro=macro_prf(golds, preds),
        micro=micro_prf(golds, preds),
        per_type_macro=per_type_prf(golds, preds, "macro"),
        per_type_micro=per_type_prf(golds, preds, "micro"),
        n_mentions=len(golds),
    )


def coverage_curve(
    golds: Sequence[Collection[str]],
    candidate_lists: Sequence[Sequence[str]],
    defs: TypeDefinition,
    types_table: ConceptTypeTable,
    max_ell: int,
) -> list[tuple[int, float]]:
    """Fraction of mentions whose gold types are all covered by the target
    types of their top-ell candidates, for ell = 1..max_ell. Nondecreasing."""
    if len(golds) != len(candidate_lists):
        raise ValueError(f"{len(golds)} gold mentions vs {len(candidate_lists)} candidate lists")
    if not golds:
        raise ValueError("no mentions")
    if max_ell < 1:
        raise ValueError("max_ell must be >= 1")
    covered_at: list[int | None] = []
    type_cache: dict[str, frozenset[str]] = {}
    for gold, candidates in zip(golds, candidate_lists):
        goal = set(gold)
        seen: set[str] = set()
        found: int | None = None
        for rank, concept in enumerate(candidates[:max_ell], start=1):
            targets = type_cache.get(concept)
            if targets is None:
                targets = apply_type_map(types_table.types_of(concept), defs)
                type_cache[concept] = targets
            seen |= targets
            if goal <= seen:
                found = rank
                break
        covered_at.append(found)
    curve = []
    for ell in range(1, max_ell + 1):
        frac = sum(1 for r in covered_at if r is not None and r <= ell) / len(golds)
        curve.append((ell, frac))
    return curve


def build_type_reps(
    backend: EncoderBackend,
    corpus: Corpus,
    defs: TypeDefinition,
    types_table: ConceptTypeTable,
) -> dict[str, np.ndarray]:
    """Per-target-type centroid of the sentence vectors of every corpus record
    whose concept carries that type."""
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    type_cache: dict[str, frozenset[str]] = {}
    for rec in corpus.records:
        if rec.concept is None:
            continue
        targets = type_cache.get(rec.concept)
        if targets is None:
            targets = apply_type_map(types_table.types_of(rec.concept), defs)
            type_cache[rec.concept] = targets
        if not targets:
            continue
        vec = sent_rep(backend, rec.tokens, rec.mention_span, key=rec.sentence_id).astype(
            np.float64
        )
        for t in targets:
            if t in sums:
                sums[t] += vec
                counts[t] += 1
            else:
                sums[t] = vec.copy()
                counts[t] = 1
    return {
        t: (sums[t] / counts[t]).astype(np.float32) for t in sorted(sums)
    }


def elmonn_baseline(
    tokens: Sequence[str],
    span: tuple[int, int],
    backend: EncoderBackend,
    type_reps: dict[str, np.ndarray],
    k: int,
    key: str | None = None,
) -> list[tuple[str, float]]:
    """Types ranked by cosine to the mention vector; top-k, ties lexicographic."""
    if not type_reps:
        raise ValueError("no type representations")
    if k < 1:
        raise ValueError("k must be >= 1")
    query = sent_rep(backend, tokens, span, key=key)
    ranked = sorted(
        ((t, cosine(query, vec)) for t, vec in type_reps.items()),
        key=lambda item: (-item[1], item[0]),
    )
    return ranked[:k]


def sample_dev_split(
    items: Sequence[T], fraction: float = 0.1, seed: int = 0
) -> tuple[list[T], list[T]]:
    """Seeded random split into (dev sample, remainder), both in input order."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    n_dev = int(len(items) * fraction)
    rng = random.Random(seed)
    picked = set(rng.sample(range(len(items)), n_dev)) if n_dev else set()
    dev = [x for i, x in enumerate(items) if i in picked]
    rest = [x for i, x in enumerate(items) if i not in picked]
    return dev, rest
