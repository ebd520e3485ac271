"""Acceptance checks: one test per criterion, one printed verdict line each.

Each test records `[criterion NN] PASS|FAIL <summary>`; the conftest
terminal-summary hook prints every recorded line after the run so the
verdicts stay visible under pytest's output capture.
"""

import time

import numpy as np
import pytest
from oracles import derangement_min_cost

from morphidx import (
    EuclideanComparator,
    MeanFuser,
    SyntheticModelParams,
    WeightedMeanFuser,
    generate_gallery,
)
from morphidx.cli import main as cli_main
from morphidx.index import build_index
from morphidx.metrics import ScoreSet, decidability, eer, morph_balance, wasserstein_cdf
from morphidx.pairing import (
    SENTINEL,
    CostMatrix,
    RandomPairing,
    SimilarityPairing,
    SoftBiometricPairing,
    solve_assignment,
)
from morphidx.retrieval import (
    SearchConfig,
    predicted_workload_multi_stage,
    predicted_workload_two_stage,
    search_exhaustive,
    search_multi_stage,
    search_two_stage,
)

COMP = EuclideanComparator()
FUSER = MeanFuser()


VERDICTS: list[str] = []


def verdict(number: int, ok: bool, summary: str) -> None:
    line = f"[criterion {number:02d}] {'PASS' if ok else 'FAIL'} {summary}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


def measure_hit_rate(gallery, index, k) -> float:
    hits = 0
    for j in range(gallery.probes.shape[0]):
        res = search_two_stage(gallery.probes[j], index, k, COMP)
        hits += int(np.any(res.candidate_ids == gallery.probe_owners[j]))
    return hits / gallery.probes.shape[0]


@pytest.fixture(scope="module")
def main_gallery():
    """The reference synthetic gallery: N=1024, d=128, sigma=0.05."""
    return generate_gallery(SyntheticModelParams(probes_per_subject=2))


def test_criterion_01_workload_formula_exactness():
    rng = np.random.default_rng(100)
    start = time.perf_counter()
    failures = []
    for n_subjects in (64, 256, 1024):
        g = generate_gallery(
            SyntheticModelParams(
                n_subjects=n_subjects, dimension=8, centroid_seed=1, noise_seed=2,
                probes_per_subject=1,
            )
        )
        probe = g.probes[0]
        for capacity in (2, 4, 8):
            index = build_index(g, RandomPairing(0), capacity, COMP, FUSER)
            roots = n_subjects // capacity
            for k in rng.integers(1, roots + 1, size=20):
                k = int(k)
                got = search_two_stage(probe, index, k, COMP).total_comparisons
                want = predicted_workload_two_stage(n_subjects, capacity, k)
                if got != want:
                    failures.append((n_subjects, capacity, k, got, want))
            stages = int(np.log2(capacity))
            for _ in range(10):
                ks, limit = [], roots
                for _ in range(stages):
                    k = int(rng.integers(1, limit + 1))
                    ks.append(k)
                    limit = 2 * k
                got = search_multi_stage(
                    probe, index, SearchConfig(tuple(ks)), COMP
                ).total_comparisons
                want = predicted_workload_multi_stage(n_subjects, capacity, ks)
                if got != want:
                    failures.append((n_subjects, capacity, tuple(ks), got, want))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 10.0
    verdict(
        1, ok,
        f"two-stage and multi-stage counters match the closed forms exactly "
        f"({len(failures)} mismatches, {elapsed:.1f}s)",
    )


def test_criterion_02_assignment_optimality():
    rng = np.random.default_rng(200)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        n = int(rng.integers(2, 9))
        costs = rng.random((n, n)) * 10.0
        np.fill_diagonal(costs, SENTINEL)
        f = solve_assignment(CostMatrix(costs))
        total = costs[np.arange(n), f.mapping].sum()
        if total != derangement_min_cost(costs):
            mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 5.0
    verdict(
        2, ok,
        f"200 assignments equal the brute-force derangement minimum "
        f"({mismatches} mismatches, {elapsed:.1f}s)",
    )


def test_criterion_03_baseline_equivalence():
    g = generate_gallery(
        SyntheticModelParams(
            n_subjects=256, dimension=128, centroid_seed=5, noise_seed=6,
            probes_per_subject=1,
        )
    )
    index = build_index(g, SimilarityPairing(), 8, COMP, FUSER)
    cfg = SearchConfig(tuple(len(layer) for layer in index.layers))
    bad = 0
    for j in range(g.probes.shape[0]):
        full = search_multi_stage(g.probes[j], index, cfg, COMP)
        base = search_exhaustive(g.probes[j], g, COMP)
        if (
            full.candidate_ids[0] != base.candidate_ids[0]
            or full.candidate_scores[0] != base.candidate_scores[0]
        ):
            bad += 1
    verdict(
        3, bad == 0,
        f"maximal shortlists reproduce the exhaustive rank-1 subject and score "
        f"bit-exactly on all 256 probes ({bad} deviations)",
    )


def test_criterion_04_workload_at_hit_rate(main_gallery):
    g = main_gallery
    n = g.subject_count
    start = time.perf_counter()

    idx2 = build_index(g, SimilarityPairing(), 2, COMP, FUSER)
    best2 = None
    for k in (8, 16, 24, 32, 40, 51):
        if measure_hit_rate(g, idx2, k) >= 1.0:
            best2 = predicted_workload_two_stage(n, 2, k)
            break
    pct2 = None if best2 is None else 100.0 * best2 / n

    idx4 = build_index(g, SimilarityPairing(), 4, COMP, FUSER)
    best4 = None
    for k in (8, 12, 16, 22, 28, 36, 44, 51):
        if measure_hit_rate(g, idx4, k) >= 0.95:
            best4 = predicted_workload_two_stage(n, 4, k)
            break
    pct4 = None if best4 is None else 100.0 * best4 / n

    elapsed = time.perf_counter() - start
    ok = (
        pct2 is not None and pct2 <= 60.0
        and pct4 is not None and pct4 <= 45.0
        and elapsed < 120.0
    )
    verdict(
        4, ok,
        f"n=2 similarity reaches 100% HR at {pct2 if pct2 is None else round(pct2, 2)}% "
        f"workload (bound 60%), n=4 reaches 95% HR at "
        f"{pct4 if pct4 is None else round(pct4, 2)}% (bound 45%), {elapsed:.0f}s",
    )


def test_criterion_05_pairing_method_ordering():
    folds = 5
    k_fixed = None
    ordered_seeds = 0
    details = []
    for i, seed in enumerate(range(1, 11)):
        g = generate_gallery(
            SyntheticModelParams(
                centroid_seed=seed, noise_seed=seed + 1000, probes_per_subject=2
            )
        )
        sim = build_index(g, SimilarityPairing(), 4, COMP, FUSER)
        if k_fixed is None:
            # smallest shortlist where similarity pairing clears 95% HR,
            # probed on the first seed and then held fixed
            for k in (1, 2, 3, 4, 6, 8):
                if measure_hit_rate(g, sim, k) >= 0.95:
                    k_fixed = k
                    break
            assert k_fixed is not None, "similarity never reached 95% HR"
        hr_sim = measure_hit_rate(g, sim, k_fixed)
        soft = build_index(g, SoftBiometricPairing(), 4, COMP, FUSER)
        hr_soft = measure_hit_rate(g, soft, k_fixed)
        hr_rand = float(
            np.mean(
                [
                    measure_hit_rate(
                        g, build_index(g, RandomPairing(f), 4, COMP, FUSER), k_fixed
                    )
                    for f in range(folds)
                ]
            )
        )
        ordered = hr_sim >= hr_soft >= hr_rand
        ordered_seeds += int(ordered)
        details.append((seed, round(hr_sim, 4), round(hr_soft, 4), round(hr_rand, 4)))
    ok = ordered_seeds >= 9
    verdict(
        5, ok,
        f"HR(similarity) >= HR(softbio) >= HR(random mean) at k={k_fixed} "
        f"in {ordered_seeds}/10 seeds",
    )


def test_criterion_06_capacity_degradation():
    bad_seeds = []
    for seed in range(1, 6):
        g = generate_gallery(
            SyntheticModelParams(
                n_subjects=256, dimension=128, centroid_seed=seed,
                noise_seed=seed + 50, probes_per_subject=1,
            )
        )
        means = []
        for capacity in (2, 4, 8):
            index = build_index(g, SimilarityPairing(), capacity, COMP, FUSER)
            owner_root = {}
            for node in index.layers[0]:
                for m in node.members:
                    owner_root[m] = node
            dists = [
                COMP.compare(g.probes[j], owner_root[int(g.probe_owners[j])].fused)
                for j in range(g.probes.shape[0])
            ]
            means.append(float(np.mean(dists)))
        if not means[0] < means[1] < means[2]:
            bad_seeds.append(seed)
    verdict(
        6, not bad_seeds,
        f"mean mated-morph dissimilarity strictly increases over capacities 2<4<8 "
        f"in all 5 seeds (violations: {bad_seeds})",
    )


def test_criterion_07_metric_unit_oracles():
    rng = np.random.default_rng(42)
    mated = rng.normal(0.0, 1.0, 100_000)
    nonmated = rng.normal(2.0, 1.0, 100_000)
    scores = ScoreSet(mated, nonmated)
    d_val = decidability(scores)
    eer_val = eer(scores)

    shift_rng = np.random.default_rng(43)
    x = shift_rng.normal(0.0, 1.0, 1000)
    shift_err = abs(wasserstein_cdf(x, x + 0.3) - 0.3)
    w_exact = wasserstein_cdf([0.0, 1.0], [0.0, 2.0])

    parts = {
        "dprime 2.0+-0.05": abs(d_val - 2.0) <= 0.05,
        "EER 0.1587+-0.01": abs(eer_val - 0.1587) <= 0.01,
        "W1 shift +-1e-9": shift_err <= 1e-9,
        "W1({0,1},{0,2})=0.5": w_exact == 0.5,
    }
    ok = all(parts.values())
    failing = [name for name, good in parts.items() if not good]
    verdict(
        7, ok,
        f"d'={d_val:.4f}, EER={eer_val:.4f}, shift error={shift_err:.2e}, "
        f"two-point W1={w_exact}" + (f" (failing: {failing})" if failing else ""),
    )


def test_criterion_08_morph_balance():
    g = generate_gallery(
        SyntheticModelParams(
            n_subjects=512, dimension=128, centroid_seed=31, noise_seed=32,
            probes_per_subject=2,
        )
    )
    weighted = WeightedMeanFuser((0.8, 0.2))
    bad = []
    for seed in range(5):
        balanced = morph_balance(g, FUSER, COMP, seed=seed)
        skewed = morph_balance(g, weighted, COMP, seed=seed)
        if not (balanced.distance < 0.02 and skewed.distance > balanced.distance):
            bad.append((seed, balanced.distance, skewed.distance))
    verdict(
        8, not bad,
        f"balanced fusion stays under 0.02 contributor distance and 0.8/0.2 fusion "
        f"exceeds it in all 5 seeds (violations: {bad})",
    )


def test_criterion_09_reference_operating_points():
    # Two reference operating points over a 1024-subject gallery, checked as
    # exact comparison-counter arithmetic (the counters do not depend on the
    # modality, only on gallery size, capacity, and shortlist sizes).
    g = generate_gallery(
        SyntheticModelParams(n_subjects=1024, dimension=8, centroid_seed=1,
                             noise_seed=2, probes_per_subject=1)
    )
    probe = g.probes[0]
    idx4 = build_index(g, RandomPairing(0), 4, COMP, FUSER)
    two = search_two_stage(probe, idx4, 22, COMP).total_comparisons
    idx8 = build_index(g, RandomPairing(0), 8, COMP, FUSER)
    multi = search_multi_stage(probe, idx8, SearchConfig((25, 32, 32)), COMP).total_comparisons
    pct_two = f"{100.0 * two / 1024:.2f}"
    pct_multi = f"{100.0 * multi / 1024:.2f}"
    ok = two == 344 and pct_two == "33.59" and multi == 306 and pct_multi == "29.88"
    verdict(
        9, ok,
        f"two-stage n=4 k=22 counts {two}/1024 = {pct_two}% and multi-stage "
        f"(25,32,32) counts {multi}/1024 = {pct_multi}%, both as exact "
        f"counter arithmetic",
    )


def test_criterion_10_sweep_determinism(tmp_path):
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text(
        "[gallery]\n"
        "n_subjects = 64\ndimension = 32\nnoise_sigma = 0.05\n"
        "centroid_seed = 3\nnoise_seed = 4\nprobes_per_subject = 1\n"
        "unenrolled_fraction = 0.25\n\n"
        "[sweep]\n"
        "capacities = 2,4\nmethods = random,softbio,similarity\nfolds = 3\n"
        "k_grid_2 = 2,4,8,16\nk_grid_4 = 1,2,4,8\nhr_levels = 0.95,1.0\n"
        "random_seed_base = 0\n\n"
        "[output]\n"
        f"directory = {tmp_path / 'out'}\ntrace = true\nworkers = 1\n"
    )
    assert cli_main(["sweep", "--config", str(cfg_path)]) == 0
    first = (tmp_path / "out" / "report.csv").read_bytes()
    assert cli_main(["sweep", "--config", str(cfg_path)]) == 0
    second = (tmp_path / "out" / "report.csv").read_bytes()
    ok = first == second and len(first) > 0
    verdict(
        10, ok,
        f"sweep run twice from one config yields byte-identical report.csv "
        f"({len(first)} bytes)",
    )
