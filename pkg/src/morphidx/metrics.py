"""Evaluation quantities: HR, CMC, EER, FNIR at FPIR, d', Wasserstein.

All rate computations work on empirical step-function distributions; no
smoothing anywhere.  Scores are dissimilarities throughout: a mated
comparison is accepted when its score is at or below the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Gallery
from .errors import InsufficientDataError, UndefinedMetricError


@dataclass(frozen=True)
class ScoreSet:
    """Mated and non-mated dissimilarity scores of one configuration."""

    mated: np.ndarray
    nonmated: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mated", np.asarray(self.mated, dtype=np.float64))
        object.__setattr__(self, "nonmated", np.asarray(self.nonmated, dtype=np.float64))


@dataclass(frozen=True)
class TradeoffPoint:
    threshold: float
    fnir: float
    fpir: float


def hit_rate(trials) -> float:
    """Fraction of trials whose true subject survives into the candidate set.

    ``trials`` is a sequence of (true_id, candidate_ids) pairs.
    """
    trials = list(trials)
    if not trials:
        raise ValueError("hit_rate needs at least one trial")
    hits = sum(1 for true_id, candidates in trials if true_id in candidates)
    return hits / len(trials)


def _ranks(rankings) -> np.ndarray:
    """1-based rank of the true subject per trial; 0 when absent."""
    rankings = list(rankings)
    if not rankings:
        raise ValueError("empty rankings")
    out = np.zeros(len(rankings), dtype=np.int64)
    for t, (true_id, ranked_ids) in enumerate(rankings):
        hits = np.flatnonzero(np.asarray(ranked_ids) == true_id)
        if hits.size:
            out[t] = int(hits[0]) + 1
    return out


def cmc_curve(rankings) -> np.ndarray:
    """CMC[r-1] = fraction of trials with the truth at rank <= r."""
    rankings = list(rankings)
    ranks = _ranks(rankings)
    max_rank = max(len(ranked) for _, ranked in rankings)
    found = ranks > 0
    return np.array([
        np.mean(found & (ranks <= r)) for r in range(1, max_rank + 1)
    ])


def rank1(rankings) -> float:
    """Rank-1 recognition rate, the head of the CMC curve."""
    ranks = _ranks(rankings)
    return float(np.mean(ranks == 1))


def _sweep_arrays(scores: ScoreSet):
    """Thresholds (with one sub-minimum anchor) and FNIR/FPIR at each."""
    mated, nonmated = scores.mated, scores.nonmated
    if mated.size == 0 or nonmated.size == 0:
        raise ValueError("both score lists must be non-empty")
    pooled = np.unique(np.concatenate([mated, nonmated]))
    thresholds = np.concatenate([[pooled[0] - 1.0], pooled])
    m_sorted = np.sort(mated)
    n_sorted = np.sort(nonmated)
    fnir = 1.0 - np.searchsorted(m_sorted, thresholds, side="right") / mated.size
    fpir = np.searchsorted(n_sorted, thresholds, side="right") / nonmated.size
    return thresholds, fnir, fpir


def fnir_fpir_sweep(scores: ScoreSet) -> list[TradeoffPoint]:
    """FNIR(t) = fraction of mated above t; FPIR(t) = fraction of nonmated at or below t."""
    thresholds, fnir, fpir = _sweep_arrays(scores)
    return [
        TradeoffPoint(float(t), float(a), float(b))
        for t, a, b in zip(thresholds, fnir, fpir)
    ]


def eer(scores: ScoreSet) -> float:
    """Midpoint of FNIR and FPIR at the threshold where they come closest."""
    _, fnir, fpir = _sweep_arrays(scores)
    i = int(np.argmin(np.abs(fnir - fpir)))
    return float(0.5 * (fnir[i] + fpir[i]))


def fnir_at_fpir(scores: ScoreSet, fpir_target: float = 0.001) -> float:
    """Smallest FNIR among thresholds keeping FPIR at or below the target.

    With fewer than 1/target nonmated scores the target sits below the
    FPIR grid resolution; the value returned is then the best point on
    the achievable grid (FPIR = 0), an exact-count limitation.
    """
    _, fnir, fpir = _sweep_arrays(scores)
    feasible = fpir <= fpir_target
    return float(fnir[feasible].min())


def decidability(scores: ScoreSet) -> float:
    """Normalized mean separation d' of the two score distributions."""
    mated, nonmated = scores.mated, scores.nonmated
    if mated.size < 2 or nonmated.size < 2:
        raise ValueError("decidability needs at least 2 scores per class")
    pooled_var = 0.5 * (mated.var(ddof=1) + nonmated.var(ddof=1))
    if pooled_var == 0.0:
        raise UndefinedMetricError("zero pooled variance")
    return float(abs(mated.mean() - nonmated.mean()) / np.sqrt(pooled_var))


def wasserstein_cdf(a, b) -> float:
    """Exact 1-Wasserstein distance between two empirical distributions.

    Equal-size inputs reduce to the mean absolute difference of the
    sorted samples; otherwise the area between the two step CDFs is
    integrated over the merged support.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if a.size == b.size:
        return float(np.mean(np.abs(np.sort(a) - np.sort(b))))
    grid = np.sort(np.concatenate([a, b]))
    cdf_a = np.searchsorted(np.sort(a), grid, side="right") / a.size
    cdf_b = np.searchsorted(np.sort(b), grid, side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b)[:-1] * np.diff(grid)))


@dataclass
class MorphBalanceResult:
    """Per-contributor-position score samples and their Wasserstein distance."""

    first_contributor: np.ndarray
    second_contributor: np.ndarray
    distance: float


def morph_balance(gallery: Gallery, fuser, comparator, seed: int) -> MorphBalanceResult:
    """Check that both parents of a two-subject morph match it equally well.

    Enrolled subjects are paired at random and their references fused;
    the probes of each parent are scored against the morph, collected by
    contributor position.  Per pair, both positions contribute the same
    number of probes, so the two collections stay size-matched.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(gallery.subject_count)

    by_owner: dict[int, list[int]] = {}
    for j, owner in enumerate(gallery.probe_owners):
        if not gallery.probe_unenrolled[j]:
            by_owner.setdefault(int(owner), []).append(j)

    first, second = [], []
    for i in range(0, gallery.subject_count - 1, 2):
        a, b = int(perm[i]), int(perm[i + 1])
        take = min(len(by_owner.get(a, ())), len(by_owner.get(b, ())))
        if take == 0:
            continue
        morph = fuser.fuse(np.stack([gallery.references[a], gallery.references[b]]))
        for j in by_owner[a][:take]:
            first.append(comparator.compare(gallery.probes[j], morph))
        for j in by_owner[b][:take]:
            second.append(comparator.compare(gallery.probes[j], morph))
    if not first:
        raise InsufficientDataError("no sampled pair has probes on both sides")

    first_arr = np.asarray(first)
    second_arr = np.asarray(second)
    return MorphBalanceResult(
        first_contributor=first_arr,
        second_contributor=second_arr,
        distance=wasserstein_cdf(first_arr, second_arr),
    )
