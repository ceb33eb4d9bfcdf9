"""Count ratios, coarse voting, and the full decision procedure."""

from __future__ import annotations

import math
import random

import pytest

from typeground.corpus import ConceptTypeTable
from typeground.esa import ScoredConcept
from typeground.inference import (
    InferenceParams,
    count_type,
    infer_from_candidates,
    ratio_r,
    select_coarse,
    target_types_of,
)

from instances import FALLBACK, build_defs, random_instance
from oracle_inference import straight_line_infer


def table_for(type_map: dict[str, list[str]], defs_targets: list[str]):
    """Build (defs, table) where each concept carries exactly the given targets."""
    defs, prim_of = build_defs(defs_targets)
    entries = {
        c: frozenset(prim_of[t] for t in targets) for c, targets in type_map.items()
    }
    return defs, ConceptTypeTable(entries)


class TestCountType:
    def test_both_typed(self):
        defs, table = table_for({"c1": ["/PER"], "c2": ["/PER"]}, ["/PER"])
        assert count_type("/PER", ["c1", "c2"], defs, table) == 2

    def test_absent_type(self):
        defs, table = table_for({"c1": ["/PER"]}, ["/PER", "/LOC"])
        assert count_type("/LOC", ["c1"], defs, table) == 0

    def test_unknown_concepts_contribute_nothing(self):
        defs, table = table_for({"c1": ["/PER"]}, ["/PER"])
        assert count_type("/PER", ["c1", "ghost"], defs, table) == 1

    def test_matches_set_membership_recount(self):
        rng = random.Random(4)
        inst = random_instance(rng)
        concepts = list(inst.target_map)
        for t in {"/T0", "/T1", "/T0/F0"}:
            expected = sum(1 for c in concepts if t in inst.target_map[c])
            assert count_type(t, concepts, inst.defs, inst.types_table) == expected


class TestRatio:
    def test_direct_arithmetic(self):
        defs, table = table_for(
            {"a": ["/X"], "b": ["/X"], "c": [], "d": [], "e": ["/Y"], "f": [], "g": [], "h": []},
            ["/X", "/Y"],
        )
        got = ratio_r("/X", "/Y", ["a", "b", "c", "d"], ["e", "f", "g", "h"], defs, table)
        assert got == pytest.approx(2.0)

    def test_identity(self):
        defs, table = table_for({"a": ["/X"], "b": []}, ["/X"])
        assert ratio_r("/X", "/X", ["a", "b"], ["a", "b"], defs, table) == 1.0

    def test_zero_over_zero(self):
        defs, table = table_for({"a": [], "b": []}, ["/X"])
        assert ratio_r("/X", "/X", ["a"], ["b"], defs, table) == 0.0

    def test_positive_over_zero_is_inf(self):
        defs, table = table_for({"a": ["/X"], "b": []}, ["/X"])
        assert ratio_r("/X", "/X", ["a"], ["b"], defs, table) == math.inf

    def test_empty_collection_rejected(self):
        defs, table = table_for({"a": ["/X"]}, ["/X"])
        with pytest.raises(ValueError):
            ratio_r("/X", "/X", [], ["a"], defs, table)


class TestSelectCoarse:
    def test_single_coarse_type(self):
        defs, table = table_for({"c": ["/X"], "d": ["/Y"]}, ["/X", "/Y"])
        ranked = [ScoredConcept("d", 0.9)]
        assert select_coarse("c", ranked, defs, table) == "/X"

    def test_vote_sums(self):
        defs, table = table_for(
            {"c": ["/A", "/B"], "e1": ["/A"], "e2": ["/A"], "e3": ["/B"]},
            ["/A", "/B"],
        )
        ranked = [ScoredConcept("e1", 0.8), ScoredConcept("e2", 0.6), ScoredConcept("e3", 0.9)]
        # votes: /A = 1.4, /B = 0.9
        assert select_coarse("c", ranked, defs, table) == "/A"

    def test_tie_breaks_lexicographically(self):
        defs, table = table_for(
            {"c": ["/A", "/B"], "e1": ["/A"], "e2": ["/B"]}, ["/A", "/B"]
        )
        ranked = [ScoredConcept("e1", 0.5), ScoredConcept("e2", 0.5)]
        assert select_coarse("c", ranked, defs, table) == "/A"

    def test_tie_breaks_by_count_first(self):
        defs, table = table_for(
            {"c": ["/A", "/B"], "e1": ["/B"], "e2": ["/B"], "e3": ["/A"]},
            ["/A", "/B"],
        )
        # equal vote weight (0.5 + 0.0 vs 0.5), /B occurs in 2 ranked concepts
        ranked = [
            ScoredConcept("e1", 0.5),
            ScoredConcept("e2", 0.0),
            ScoredConcept("e3", 0.5),
        ]
        assert select_coarse("c", ranked, defs, table) == "/B"

    def test_concept_without_coarse_rejected(self):
        defs, table = table_for({"c": []}, ["/X"])
        with pytest.raises(ValueError):
            select_coarse("c", [], defs, table)


def run_both(inst, prior_threshold=0.5):
    params = InferenceParams(
        prior_threshold=prior_threshold,
        surface_fine_ratio=inst.surface_fine_ratio,
        context_fine_ratio=inst.context_fine_ratio,
    )
    pred = infer_from_candidates(
        inst.c_surf,
        inst.surf_prob,
        inst.retrieved,
        inst.ranked,
        params,
        inst.defs,
        inst.types_table,
        fallback_target=FALLBACK,
    )
    oracle = straight_line_infer(
        inst.c_surf,
        inst.surf_prob,
        [(sc.concept, sc.score) for sc in inst.retrieved],
        [(sc.concept, sc.score) for sc in inst.ranked],
        inst.target_map,
        prior_threshold,
        inst.surface_fine_ratio,
        inst.context_fine_ratio,
        FALLBACK,
    )
    return pred, oracle


class TestDecisionProcedure:
    def test_target_mapping_layer_is_exact(self):
        rng = random.Random(2)
        for _ in range(20):
            inst = random_instance(rng)
            for c, expected in inst.target_map.items():
                assert target_types_of(c, inst.defs, inst.types_table) == expected

    def test_surface_branch_taken_when_prior_confident(self):
        defs, table = table_for(
            {"a": ["/T", "/T/F"], "b": ["/T"], "c": [], "d": []}, ["/T", "/T/F"]
        )
        retrieved = [ScoredConcept(x, 1.0) for x in ["a", "b", "c", "d"]]
        ranked = [ScoredConcept("a", 0.9), ScoredConcept("b", 0.8)]
        params = InferenceParams(surface_fine_ratio=0.4)
        pred = infer_from_candidates("a", 0.6, retrieved, ranked, params, defs, table)
        assert pred.used_surface is True
        assert pred.coarse == "/T"
        assert pred.fine == {"/T/F"}  # 1-of-2 vs 2-of-2 -> 0.5 >= 0.4

    def test_surface_skipped_when_prior_weak(self):
        defs, table = table_for(
            {"a": ["/T"], "b": ["/T"], "c": [], "d": []}, ["/T"]
        )
        retrieved = [ScoredConcept(x, 1.0) for x in ["a", "b", "c", "d"]]
        ranked = [ScoredConcept("a", 0.9), ScoredConcept("b", 0.8)]
        pred = infer_from_candidates(
            "a", 0.4, retrieved, ranked, InferenceParams(), defs, table
        )
        assert pred.used_surface is False

    def test_unanimous_coarse_with_no_fine(self):
        defs, table = table_for(
            {"a": ["/PER"], "b": ["/PER"], "c": ["/PER"]}, ["/PER", "/LOC"]
        )
        retrieved = [ScoredConcept(x, 1.0) for x in ["a", "b", "c"]]
        ranked = [ScoredConcept("a", 0.7), ScoredConcept("b", 0.6), ScoredConcept("c", 0.5)]
        pred = infer_from_candidates(None, 0.0, retrieved, ranked, InferenceParams(), defs, table)
        assert pred.coarse == "/PER"
        assert pred.fine == frozenset()

    def test_fine_kept_at_low_support_threshold(self):
        type_map = {f"e{i}": ["/T"] for i in range(8)}
        for i in range(3):
            type_map[f"e{i}"] = ["/T", "/T/F"]
        type_map.update({f"x{i}": [] for i in range(6)})
        defs, table = table_for(type_map, ["/T", "/T/F"])
        retrieved = [ScoredConcept(c, 1.0) for c in sorted(type_map)]
        ranked_concepts = [f"e{i}" for i in range(8)] + ["x0", "x1"]
        ranked = [
            ScoredConcept(c, round(0.9 - 0.05 * i, 2)) for i, c in enumerate(ranked_concepts)
        ]
        pred = infer_from_candidates(
            None, 0.0, retrieved, ranked, InferenceParams(context_fine_ratio=0.3), defs, table
        )
        # fine share 3-of-10 against coarse share 8-of-10 -> 0.375
        assert pred.coarse == "/T"
        assert pred.fine == {"/T/F"}
        strict = infer_from_candidates(
            None, 0.0, retrieved, ranked, InferenceParams(context_fine_ratio=0.4), defs, table
        )
        assert strict.fine == frozenset()

    def test_empty_retrieval_falls_back(self):
        defs, table = table_for({"a": ["/T"]}, ["/T"])
        pred = infer_from_candidates(
            None, 0.0, [], [], InferenceParams(), defs, table, fallback_target="/NONE"
        )
        assert pred.coarse == "/NONE"
        assert pred.fine == frozenset()
        assert any("falling back" in line for line in pred.trace)

    def test_fallback_defaults_to_other_when_defined(self):
        defs, table = table_for({"a": ["/OTHER"]}, ["/OTHER"])
        pred = infer_from_candidates(None, 0.0, [], [], InferenceParams(), defs, table)
        assert pred.coarse == "/OTHER"

    def test_branch_exclusivity_in_trace(self):
        rng = random.Random(31)
        for _ in range(200):
            inst = random_instance(rng)
            pred, _ = run_both(inst)
            branch_lines = [t for t in pred.trace if t.startswith("branch:")]
            fallback_lines = [t for t in pred.trace if "falling back" in t]
            assert len(branch_lines) + len(fallback_lines) >= 1
            assert len(branch_lines) <= 1
            assert pred.trace

    def test_fine_always_compatible_with_coarse(self):
        rng = random.Random(77)
        for _ in range(500):
            inst = random_instance(rng)
            pred, _ = run_both(inst)
            for fine in pred.fine:
                assert fine.startswith(pred.coarse + "/")

    def test_matches_straight_line_transcription(self):
        rng = random.Random(20250811)
        branches = set()
        for _ in range(2000):
            inst = random_instance(rng)
            pred, (coarse, fine, used_surface, flags) = run_both(inst)
            assert pred.coarse == coarse
            assert pred.fine == fine
            assert pred.used_surface == used_surface
            branches.add(
                (flags["branch"], flags["prior_ok"], flags["tau_nonempty"], flags["ctilde_empty"])
            )
        assert any(b[0] == "surface" for b in branches)
        assert any(b[0] == "context" for b in branches)
        assert any(b[0] == "fallback" for b in branches)

    def test_raising_context_ratio_never_adds_fine_types(self):
        rng = random.Random(5150)
        checked = 0
        for _ in range(300):
            inst = random_instance(rng)
            if not inst.ranked:
                continue
            params_low = InferenceParams(context_fine_ratio=0.2)
            params_high = InferenceParams(context_fine_ratio=0.6)
            low = infer_from_candidates(
                None, 0.0, inst.retrieved, inst.ranked, params_low, inst.defs,
                inst.types_table, fallback_target=FALLBACK,
            )
            high = infer_from_candidates(
                None, 0.0, inst.retrieved, inst.ranked, params_high, inst.defs,
                inst.types_table, fallback_target=FALLBACK,
            )
            assert high.fine <= low.fine
            checked += 1
        assert checked > 100


class TestParams:
    def test_defaults(self):
        params = InferenceParams()
        assert params.prior_threshold == 0.5
        assert params.surface_fine_ratio == 0.8
        assert params.context_fine_ratio == 0.3
        assert params.esa_top == 300
        assert params.rerank_top == 20

    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            InferenceParams(prior_threshold=1.5)
        with pytest.raises(ValueError):
            InferenceParams(surface_fine_ratio=0.0)
        with pytest.raises(ValueError):
            InferenceParams(esa_top=0)


def test_prediction_record_shape():
    defs, table = table_for({"a": ["/T"]}, ["/T"])
    retrieved = [ScoredConcept("a", 1.0)]
    ranked = [ScoredConcept("a", 0.5)]
    pred = infer_from_candidates(None, 0.0, retrieved, ranked, InferenceParams(), defs, table)
    record = pred.to_record()
    assert set(record) == {"coarse", "fine", "used_surface", "concepts", "trace"}
    assert record["concepts"] == [{"title": "a", "consistency": 0.5}]
    assert record["fine"] == sorted(record["fine"])
