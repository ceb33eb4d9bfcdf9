"""Coarse and fine type inference over retrieved concept candidates.

Inputs per mention: the surface-prior concept (with its probability), the
retrieval candidates, and the consistency-ranked subset. The decision
procedure:

  1. Keep the surface concept's coarse types whose share among the
     consistency-ranked concepts exceeds their share among the retrieval
     candidates (count ratio > 1).
  2. If the surface prior is confident (>= prior_threshold) and step 1 kept
     anything, type from the surface concept: one coarse type by
     consistency-weighted voting, then its fine types whose support relative
     to the chosen coarse type (over the ranked set plus the surface
     concept) reaches surface_fine_ratio.
  3. Otherwise type from context: restrict the ranked set to concepts with
     some ratio->1 coarse type (fall back to the full ranked set if that
     leaves nothing), take the most consistent concept, vote its coarse
     types, then keep fine types from anywhere in the ranked set whose
     relative support reaches context_fine_ratio.

Every prediction carries a decision trace. When retrieval or re-ranking
produces nothing to decide from, the prediction falls back to a designated
target ("/OTHER" when the taxonomy defines it, else "abstain").
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import ConceptTypeTable
from .encoder import ConceptRepStore, EncoderBackend, cosine, rerank, sent_rep
from .esa import EsaIndex, ScoredConcept, esa_candidates
from .priors import PriorTable, surface_concept
from .typedefs import TypeDefinition, apply_type_map, is_compatible, target_depth

ABSTAIN = "abstain"


@dataclass(frozen=True)
class InferenceParams:
    """Decision thresholds and candidate list sizes."""

    prior_threshold: float = 0.5
    surface_fine_ratio: float = 0.8
    context_fine_ratio: float = 0.3
    esa_top: int = 300
    rerank_top: int = 20

    def __post_init__(self) -> None:
        if not 0.0 <= self.prior_threshold <= 1.0:
            raise ValueError(f"prior_threshold must be in [0, 1], got {self.prior_threshold}")
        if self.surface_fine_ratio <= 0.0 or self.context_fine_ratio <= 0.0:
            raise ValueError("fine-type ratios must be > 0")
        if self.esa_top < 1 or self.rerank_top < 1:
            raise ValueError("candidate list sizes must be >= 1")


@dataclass(frozen=True)
class TypePrediction:
    coarse: str
    fine: frozenset[str]
    used_surface: bool
    concepts: tuple[ScoredConcept, ...]
    trace: tuple[str, ...]

    def predicted_types(self) -> frozenset[str]:
        return self.fine | {self.coarse}

    def to_record(self) -> dict:
        return {
            "coarse": self.coarse,
            "fine": sorted(self.fine),
            "used_surface": self.used_surface,
            "concepts": [
                {"title": sc.concept, "consistency": sc.score} for sc in self.concepts
            ],
            "trace": list(self.trace),
        }


def target_types_of(concept: str, defs: TypeDefinition, types_table: ConceptTypeTable) -> frozenset[str]:
    """T applied to the concept's primitive types; empty for unknown concepts."""
    return apply_type_map(types_table.types_of(concept), defs)


def count_type(
    target: str,
    concepts: Iterable[str],
    defs: TypeDefinition,
    types_table: ConceptTypeTable,
) -> int:
    """Number of concepts in the collection carrying the target type."""
    return sum(1 for c in concepts if target in target_types_of(c, defs, types_table))


def ratio_r(
    target: str,
    other_target: str,
    collection: Sequence[str],
    other_collection: Sequence[str],
    defs: TypeDefinition,
    types_table: ConceptTypeTable,
) -> float:
    """(share of ``target`` in ``collection``) / (share of ``other_target`` in
    ``other_collection``); 0/0 is 0 and x/0 is +inf for x > 0."""
    if not collection or not other_collection:
        raise ValueError("type-count ratio over an empty collection")
    num = count_type(target, collection, defs, types_table) / len(collection)
    den = count_type(other_target, other_collection, defs, types_table) / len(other_collection)
    if den == 0.0:
        return math.inf if num > 0.0 else 0.0
    return num / den


def _share_ratio(num_count: int, num_size: int, den_count: int, den_size: int) -> float:
    num = num_count / num_size
    den = den_count / den_size
    if den == 0.0:
        return math.inf if num > 0.0 else 0.0
    return num / den


class _TypeMemo:
    """Caches target-type sets per concept for one inference call."""

    def __init__(self, defs: TypeDefinition, types_table: ConceptTypeTable):
        self.defs = defs
        self.types_table = types_table
        self._cache: dict[str, frozenset[str]] = {}

    def targets(self, concept: str) -> frozenset[str]:
        got = self._cache.get(concept)
        if got is None:
            got = target_types_of(concept, self.defs, self.types_table)
            self._cache[concept] = got
        return got

    def coarse(self, concept: str) -> frozenset[str]:
        return frozenset(t for t in self.targets(concept) if target_depth(t) == 1)

    def fine(self, concept: str) -> frozenset[str]:
        return frozenset(t for t in self.targets(concept) if target_depth(t) >= 2)

    def count(self, target: str, concepts: Sequence[str]) -> int:
        return sum(1 for c in concepts if target in self.targets(c))


def select_coarse(
    concept: str,
    ranked: Sequence[ScoredConcept],
    defs: TypeDefinition,
    types_table: ConceptTypeTable,
    trace: list[str] | None = None,
) -> str:
    """Consistency-weighted vote over the concept's coarse types.

    Each ranked concept adds its consistency to every coarse type it shares
    with the candidate set. Ties break by higher occurrence count in the
    ranked set, then lexicographically.
    """
    memo = _TypeMemo(defs, types_table)
    candidates = sorted(t for t in memo.targets(concept) if target_depth(t) == 1)
    if not candidates:
        raise ValueError(f"concept {concept!r} has no coarse target types")
    ranked_concepts = [sc.concept for sc in ranked]
    best: str | None = None
    best_key: tuple[float, int] | None = None
    for target in candidates:
        vote = 0.0
        for sc in ranked:
            if target in memo.coarse(sc.concept):
                vote += sc.score
        key = (vote, memo.count(target, ranked_concepts))
        if trace is not None:
            trace.append(f"vote {target}: weight={vote:.6g} count={key[1]}")
        if best_key is None or key > best_key:
            best, best_key = target, key
    assert best is not None
    return best


def _fallback_target(defs: TypeDefinition, explicit: str | None) -> str:
    if explicit is not None:
        return explicit
    if "/OTHER" in defs.coarse_set:
        return "/OTHER"
    return ABSTAIN


def _fallback_prediction(
    reason: str,
    target: str,
    concepts: tuple[ScoredConcept, ...],
    trace: list[str],
) -> TypePrediction:
    trace.append(f"{reason}; falling back to {target}")
    return TypePrediction(
        coarse=target,
        fine=frozenset(),
        used_surface=False,
        concepts=concepts,
        trace=tuple(trace),
    )


def infer_from_candidates(
    c_surf: str | None,
    surf_prob: float,
    retrieved: Sequence[ScoredConcept],
    ranked: Sequence[ScoredConcept],
    params: InferenceParams,
    defs: TypeDefinition,
    types_table: ConceptTypeTable,
    fallback_target: str | None = None,
    surf_consistency: float = 0.0,
    trace: list[str] | None = None,
) -> TypePrediction:
    """Decision procedure over already-retrieved candidate lists."""
    trace = trace if trace is not None else []
    fallback = _fallback_target(defs, fallback_target)
    if not retrieved:
        return _fallback_prediction("no retrieval candidates", fallback, (), trace)
    if not ranked:
        return _fallback_prediction(
            "no consistency-ranked candidates", fallback, (), trace
        )

    memo = _TypeMemo(defs, types_table)
    ranked_concepts = [sc.concept for sc in ranked]
    retrieved_concepts = [sc.concept for sc in retrieved]

    def ranked_vs_retrieved(target: str) -> float:
        return _share_ratio(
            memo.count(target, ranked_concepts),
            len(ranked_concepts),
            memo.count(target, retrieved_concepts),
            len(retrieved_concepts),
        )

    tau_surf: list[str] = []
    if c_surf is not None:
        tau_surf = [t for t in sorted(memo.coarse(c_surf)) if ranked_vs_retrieved(t) > 1.0]
        trace.append(
            f"surface concept {c_surf} prob={surf_prob:.6g}; "
            f"ratio-supported coarse types: {tau_surf or 'none'}"
        )
    else:
        trace.append("no surface concept")

    if c_surf is not None and surf_prob >= params.prior_threshold and tau_surf:
        trace.append("branch: surface")
        coarse = select_coarse(c_surf, ranked, defs, types_table, trace=trace)
        pool = list(ranked_concepts)
        if c_surf not in pool:
            pool.append(c_surf)
        fine = []
        for target in sorted(memo.fine(c_surf)):
            if not is_compatible(target, coarse):
                continue
            ratio = _share_ratio(
                memo.count(target, pool), len(pool),
                memo.count(coarse, pool), len(pool),
            )
            trace.append(f"fine {target}: ratio={ratio:.6g} (>= {params.surface_fine_ratio:.6g}?)")
            if ratio >= params.surface_fine_ratio:
                fine.append(target)
        concepts = tuple(ranked) + (
            (ScoredConcept(c_surf, surf_consistency),) if c_surf not in ranked_concepts else ()
        )
        return TypePrediction(
            coarse=coarse,
            fine=frozenset(fine),
            used_surface=True,
            concepts=concepts,
            trace=tuple(trace),
        )

    trace.append("branch: context")
    supported = [
        sc for sc in ranked if any(ranked_vs_retrieved(t) > 1.0 for t in sorted(memo.coarse(sc.concept)))
    ]
    if supported:
        pool = supported
    else:
        trace.append("no ratio-supported candidate; using full ranked set")
        pool = [sc for sc in ranked if memo.coarse(sc.concept)]
        if not pool:
            return _fallback_prediction(
                "no ranked candidate carries a coarse type", fallback, tuple(ranked), trace
            )
    chosen = pool[0]
    for sc in pool[1:]:
        if sc.score > chosen.score:
            chosen = sc
    trace.append(f"most consistent supported concept: {chosen.concept} ({chosen.score:.6g})")
    coarse = select_coarse(chosen.concept, ranked, defs, types_table, trace=trace)
    fine_pool = sorted({t for c in ranked_concepts for t in memo.fine(c)})
    fine = []
    for target in fine_pool:
        if not is_compatible(target, coarse):
            continue
        ratio = _share_ratio(
            memo.count(target, ranked_concepts), len(ranked_concepts),
            memo.count(coarse, ranked_concepts), len(ranked_concepts),
        )
        trace.append(f"fine {target}: ratio={ratio:.6g} (>= {params.context_fine_ratio:.6g}?)")
        if ratio >= params.context_fine_ratio:
            fine.append(target)
    return TypePrediction(
        coarse=coarse,
        fine=frozenset(fine),
        used_surface=False,
        concepts=tuple(ranked),
        trace=tuple(trace),
    )


def infer_types(
    tokens: Sequence[str],
    span: tuple[int, int],
    params: InferenceParams,
    index: EsaIndex,
    backend: EncoderBackend,
    store: ConceptRepStore,
    priors: PriorTable | None,
    defs: TypeDefinition,
    types_table: ConceptTypeTable,
    fallback_target: str | None = None,
    key: str | None = None,
) -> TypePrediction:
    """Full per-mention pipeline: retrieve, re-rank, look up the prior, decide."""
    trace: list[str] = []
    retrieved = esa_candidates(index, tokens, params.esa_top)
    trace.append(f"retrieval: {len(retrieved)} candidates")
    ranked = rerank(
        retrieved, tokens, span, backend, store, params.rerank_top, key=key, trace=trace
    ) if retrieved else []
    trace.append(f"re-ranked: {len(ranked)} candidates")

    c_surf: str | None = None
    surf_prob = 0.0
    surf_consistency = 0.0
    if priors is not None:
        start, end = span
        hit = surface_concept(priors, tokens[start:end])
        if hit is not None:
            c_surf, surf_prob = hit
            if c_surf in store.reps:
                surf_consistency = cosine(
                    sent_rep(backend, tokens, span, key=key), store.reps[c_surf]
                )

    return infer_from_candidates(
        c_surf,
        surf_prob,
        retrieved,
        ranked,
        params,
        defs,
        types_table,
        fallback_target=fallback_target,
        surf_consistency=surf_consistency,
        trace=trace,
    )
