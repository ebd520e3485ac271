"""Exhaustive and cascaded search, workload counting, open-set decisions."""

import numpy as np
import pytest

from morphidx import (
    EuclideanComparator,
    Gallery,
    MeanFuser,
    SyntheticModelParams,
    generate_gallery,
)
from morphidx.index import build_index
from morphidx.pairing import RandomPairing, SimilarityPairing
from morphidx.retrieval import (
    REJECTED,
    SearchConfig,
    decide_open_set,
    predicted_workload_multi_stage,
    predicted_workload_two_stage,
    search_exhaustive,
    search_multi_stage,
    search_two_stage,
)

COMP = EuclideanComparator()
FUSER = MeanFuser()


def make_gallery(n=64, d=32, seed=3, **kw):
    return generate_gallery(
        SyntheticModelParams(
            n_subjects=n, dimension=d, centroid_seed=seed, noise_seed=seed + 1, **kw
        )
    )


def hit_fraction(gallery, search_fn):
    hits = 0
    for probe, owner in zip(gallery.probes, gallery.probe_owners):
        result = search_fn(probe)
        hits += int(result.candidate_ids[0] == owner)
    return hits / gallery.probes.shape[0]


class TestExhaustive:
    def test_counts_every_reference(self):
        g = make_gallery(n=64)
        r = search_exhaustive(g.probes[0], g, COMP)
        assert r.comparisons_per_stage == (64,)
        assert r.total_comparisons == 64
        assert r.candidate_ids.shape == (64,)

    def test_reference_probe_is_a_perfect_match(self):
        g = make_gallery(n=32)
        r = search_exhaustive(g.references[5], g, COMP)
        assert r.candidate_ids[0] == 5
        assert r.candidate_scores[0] == 0.0

    def test_scores_sorted_ascending(self):
        g = make_gallery()
        r = search_exhaustive(g.probes[3], g, COMP)
        assert np.all(np.diff(r.candidate_scores) >= 0)

    def test_rank_one_accuracy_on_default_model(self):
        g = generate_gallery(SyntheticModelParams())
        assert hit_fraction(g, lambda p: search_exhaustive(p, g, COMP)) >= 0.995

    def test_tie_breaks_toward_smaller_id(self):
        d = 4
        e0 = np.zeros(d); e0[0] = 1.0
        e1 = np.zeros(d); e1[1] = 1.0
        e2 = np.zeros(d); e2[2] = 1.0
        g = Gallery(
            dimension=d,
            references=np.stack([e0, e0, e1, e2]),
            attributes=np.zeros((4, 3), dtype=np.uint8),
            probes=e0[None, :].copy(),
            probe_owners=np.array([0], dtype=np.int64),
            probe_unenrolled=np.array([False]),
            probe_attributes=np.zeros((1, 3), dtype=np.uint8),
        )
        r = search_exhaustive(g.probes[0], g, COMP)
        assert r.candidate_scores[0] == r.candidate_scores[1] == 0.0
        assert r.candidate_ids[0] == 0 and r.candidate_ids[1] == 1

    def test_ranked_candidates_property(self):
        g = make_gallery(n=16)
        r = search_exhaustive(g.probes[0], g, COMP)
        rc = r.ranked_candidates
        assert rc[0] == (int(r.candidate_ids[0]), float(r.candidate_scores[0]))
        assert len(rc) == 16


class TestTwoStage:
    def test_workload_counts_full_pairs(self):
        g = make_gallery(n=1024, d=16, seed=1)
        idx = build_index(g, RandomPairing(0), 2, COMP, FUSER)
        r = search_two_stage(g.probes[0], idx, 16, COMP)
        assert r.comparisons_per_stage == (512, 32)
        assert r.total_comparisons == 544
        assert r.total_comparisons == predicted_workload_two_stage(1024, 2, 16)

    def test_workload_counts_capacity_four(self):
        g = make_gallery(n=1024, d=16, seed=1)
        idx = build_index(g, RandomPairing(0), 4, COMP, FUSER)
        r = search_two_stage(g.probes[0], idx, 22, COMP)
        assert r.comparisons_per_stage == (256, 88)
        assert r.total_comparisons == 344
        assert r.total_comparisons / 1024 == 0.3359375

    def test_deep_cascade_skips_middle_layers(self):
        g = make_gallery(n=64, d=16)
        idx = build_index(g, RandomPairing(0), 8, COMP, FUSER)
        r = search_two_stage(g.probes[0], idx, 2, COMP)
        assert r.comparisons_per_stage == (8, 16)

    def test_maximal_shortlist_matches_exhaustive(self):
        g = make_gallery(n=64)
        idx = build_index(g, SimilarityPairing(), 2, COMP, FUSER)
        for probe in g.probes[:10]:
            full = search_two_stage(probe, idx, 32, COMP)
            base = search_exhaustive(probe, g, COMP)
            assert np.array_equal(full.candidate_ids, base.candidate_ids)
            assert np.array_equal(full.candidate_scores, base.candidate_scores)

    def test_savings_region(self):
        # n=2 with k below a tenth of the gallery stays under one full sweep
        g = make_gallery(n=1024, d=16, seed=1)
        idx = build_index(g, RandomPairing(0), 2, COMP, FUSER)
        r = search_two_stage(g.probes[0], idx, 51, COMP)
        assert r.total_comparisons < 1024

    def test_hit_rate_nondecreasing_in_k(self):
        g = make_gallery(n=128, d=32, seed=6)
        idx = build_index(g, SimilarityPairing(), 2, COMP, FUSER)
        rates = [
            hit_fraction(g, lambda p: search_two_stage(p, idx, k, COMP))
            for k in (1, 2, 4, 8, 16, 32, 64)
        ]
        assert all(b >= a for a, b in zip(rates, rates[1:]))
        assert rates[-1] >= 0.995  # full shortlist equals the exhaustive sweep

    def test_shortlist_out_of_range_rejected(self):
        g = make_gallery(n=64)
        idx = build_index(g, RandomPairing(0), 2, COMP, FUSER)
        with pytest.raises(ValueError):
            search_two_stage(g.probes[0], idx, 0, COMP)
        with pytest.raises(ValueError):
            search_two_stage(g.probes[0], idx, 33, COMP)

    def test_trace_records_both_stages(self):
        g = make_gallery(n=64)
        idx = build_index(g, RandomPairing(0), 2, COMP, FUSER)
        sink = []
        r = search_two_stage(g.probes[0], idx, 4, COMP, trace=sink)
        assert [t["stage"] for t in sink] == [1, 2]
        assert [t["kind"] for t in sink] == ["morph", "reference"]
        assert len(sink[0]["nodes"]) == r.comparisons_per_stage[0]
        assert len(sink[1]["subjects"]) == r.comparisons_per_stage[1]
        assert len(sink[0]["retained"]) == 4


class TestMultiStage:
    def test_workload_counts_capacity_eight(self):
        g = make_gallery(n=1024, d=16, seed=1)
        idx = build_index(g, RandomPairing(0), 8, COMP, FUSER)
        r = search_multi_stage(g.probes[0], idx, SearchConfig((12, 12, 12)), COMP)
        assert r.comparisons_per_stage == (128, 24, 24, 24)
        assert r.total_comparisons == 200
        assert r.total_comparisons == predicted_workload_multi_stage(1024, 8, (12, 12, 12))

    def test_maximal_shortlists_match_exhaustive(self):
        g = make_gallery(n=64, d=24, seed=9)
        idx = build_index(g, SimilarityPairing(), 8, COMP, FUSER)
        cfg = SearchConfig((8, 16, 32))
        for probe in g.probes[:10]:
            full = search_multi_stage(probe, idx, cfg, COMP)
            base = search_exhaustive(probe, g, COMP)
            assert np.array_equal(full.candidate_ids, base.candidate_ids)
            assert np.array_equal(full.candidate_scores, base.candidate_scores)

    def test_counter_matches_prediction_under_full_groups(self):
        rng = np.random.default_rng(12)
        g = make_gallery(n=256, d=16, seed=2)
        for cap in (2, 4, 8):
            idx = build_index(g, RandomPairing(1), cap, COMP, FUSER)
            stages = int(np.log2(cap))
            for _ in range(10):
                ks = []
                limit = 256 // cap
                for _ in range(stages):
                    k = int(rng.integers(1, limit + 1))
                    ks.append(k)
                    limit = 2 * k
                r = search_multi_stage(g.probes[0], idx, SearchConfig(tuple(ks)), COMP)
                assert r.total_comparisons == predicted_workload_multi_stage(
                    256, cap, ks
                ), (cap, ks)

    def test_two_stage_prediction_formula(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            cap = int(rng.choice([2, 4, 8]))
            n = int(rng.choice([64, 128, 256, 1024]))
            k = int(rng.integers(1, n // cap + 1))
            g_roots = n // cap
            assert predicted_workload_two_stage(n, cap, k) == g_roots + k * cap

    def test_prediction_ceils_partial_roots(self):
        assert predicted_workload_two_stage(61, 2, 3) == 31 + 6
        assert predicted_workload_multi_stage(66, 4, (2, 2)) == 17 + 8

    def test_partial_groups_never_exceed_prediction(self):
        g = make_gallery(n=61, d=16, seed=4)
        idx = build_index(g, SimilarityPairing(), 2, COMP, FUSER)
        for k in (1, 3, 10, 31):
            r = search_multi_stage(g.probes[0], idx, SearchConfig((k,)), COMP)
            assert r.total_comparisons <= predicted_workload_multi_stage(61, 2, (k,))

    def test_hit_rate_reasonable_at_moderate_shortlists(self):
        g = make_gallery(n=256, d=32, seed=8)
        idx = build_index(g, SimilarityPairing(), 4, COMP, FUSER)
        cfg = SearchConfig((16, 16))
        assert hit_fraction(g, lambda p: search_multi_stage(p, idx, cfg, COMP)) >= 0.9

    def test_config_length_must_match_cascade(self):
        g = make_gallery(n=64)
        idx = build_index(g, RandomPairing(0), 4, COMP, FUSER)
        with pytest.raises(ValueError):
            search_multi_stage(g.probes[0], idx, SearchConfig((4,)), COMP)
        with pytest.raises(ValueError):
            search_multi_stage(g.probes[0], idx, SearchConfig((4, 4, 4)), COMP)

    def test_shortlist_bounds_checked_per_layer(self):
        g = make_gallery(n=64)
        idx = build_index(g, RandomPairing(0), 4, COMP, FUSER)
        with pytest.raises(ValueError):
            search_multi_stage(g.probes[0], idx, SearchConfig((17, 4)), COMP)
        with pytest.raises(ValueError):
            search_multi_stage(g.probes[0], idx, SearchConfig((4, 0)), COMP)

    def test_trace_depth_matches_level_count(self):
        g = make_gallery(n=64)
        idx = build_index(g, RandomPairing(0), 8, COMP, FUSER)
        sink = []
        r = search_multi_stage(g.probes[0], idx, SearchConfig((2, 3, 4)), COMP, trace=sink)
        assert [t["stage"] for t in sink] == [1, 2, 3, 4]
        assert sink[-1]["kind"] == "reference"
        assert [len(t.get("nodes", t.get("subjects"))) for t in sink] == list(
            r.comparisons_per_stage
        )


class TestOpenSet:
    def make_open_gallery(self):
        return make_gallery(n=64, d=32, seed=21, unenrolled_fraction=0.25)

    def test_decision_function(self):
        g = self.make_open_gallery()
        enrolled = ~g.probe_unenrolled
        probe_in = g.probes[enrolled][0]
        owner_in = int(g.probe_owners[enrolled][0])
        probe_out = g.probes[g.probe_unenrolled][0]
        r_in = search_exhaustive(probe_in, g, COMP)
        r_out = search_exhaustive(probe_out, g, COMP)
        assert decide_open_set(r_in, 0.8) == owner_in
        assert decide_open_set(r_out, 0.8) == REJECTED
        # a sub-zero threshold rejects everything
        assert decide_open_set(r_in, -1.0) == REJECTED

    def test_config_threshold_sets_decision(self):
        g = self.make_open_gallery()
        idx = build_index(g, SimilarityPairing(), 2, COMP, FUSER)
        k = len(idx.layers[0])
        enrolled = ~g.probe_unenrolled
        probe_in = g.probes[enrolled][0]
        owner_in = int(g.probe_owners[enrolled][0])
        probe_out = g.probes[g.probe_unenrolled][0]
        r = search_multi_stage(probe_in, idx, SearchConfig((k,), 0.8), COMP)
        assert r.decision == owner_in
        r = search_multi_stage(probe_out, idx, SearchConfig((k,), 0.8), COMP)
        assert r.decision == REJECTED
        r = search_multi_stage(probe_in, idx, SearchConfig((k,)), COMP)
        assert r.decision is None

    def test_open_set_error_rates_separate_cleanly(self):
        g = self.make_open_gallery()
        threshold = 0.8
        wrong = 0
        for probe, owner, out in zip(g.probes, g.probe_owners, g.probe_unenrolled):
            d = decide_open_set(search_exhaustive(probe, g, COMP), threshold)
            if out:
                wrong += int(d != REJECTED)
            else:
                wrong += int(d != owner)
        assert wrong == 0
