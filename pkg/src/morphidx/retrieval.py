"""Search over the gallery: exhaustive baseline and cascaded shortlist filtering.

Every search returns the candidates ranked by final-stage reference
score (morph scores only steer the filtering, never the ranking) plus an
exact count of template comparisons per stage.  Ties break toward the
smaller subject id, making every search deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Gallery
from .index import CascadeIndex

# Open-set decision value standing for "probe rejected as unenrolled".
REJECTED = -1


@dataclass(frozen=True)
class SearchConfig:
    """Per-level shortlist sizes (finest last) and optional open-set threshold."""

    shortlist_sizes: tuple[int, ...]
    open_set_threshold: float | None = None


@dataclass
class SearchResult:
    candidate_ids: np.ndarray      # (m,) int64, ascending final-stage score
    candidate_scores: np.ndarray   # (m,) float64
    comparisons_per_stage: tuple[int, ...]
    total_comparisons: int
    decision: int | None           # subject id, REJECTED, or None if not decided

    @property
    def ranked_candidates(self) -> list[tuple[int, float]]:
        return [
            (int(i), float(s))
            for i, s in zip(self.candidate_ids, self.candidate_scores)
        ]


def _rank(ids: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((ids, scores))
    return ids[order], scores[order]


def _top(count: int, keys: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Keys of the ``count`` best scores; ties go to the smaller key."""
    return keys[np.lexsort((keys, scores))[:count]]


def _trace(sink, **record) -> None:
    if sink is not None:
        sink.append(record)


def search_exhaustive(probe: np.ndarray, gallery: Gallery, comparator) -> SearchResult:
    """Compare the probe against every reference; the 100% workload baseline."""
    scores = comparator.one_to_many(probe, gallery.references)
    ids, scores = _rank(np.arange(gallery.subject_count, dtype=np.int64), scores)
    n = gallery.subject_count
    return SearchResult(
        candidate_ids=ids,
        candidate_scores=scores,
        comparisons_per_stage=(n,),
        total_comparisons=n,
        decision=None,
    )


def search_two_stage(
    probe: np.ndarray,
    index: CascadeIndex,
    k: int,
    comparator,
    trace: list | None = None,
) -> SearchResult:
    """Root filtering straight to references: morphs once, then the shortlist.

    Stage 1 scores all roots; stage 2 scores the references inside the k
    retained roots.  Intermediate layers of a deeper cascade are skipped.
    """
    roots = index.layer_matrix(0)
    if not 1 <= k <= roots.shape[0]:
        raise ValueError(f"k must lie in [1, {roots.shape[0]}], got {k}")
    root_scores = comparator.one_to_many(probe, roots)
    root_keys = np.arange(roots.shape[0], dtype=np.int64)
    retained = _top(k, root_keys, root_scores)
    _trace(
        trace, stage=1, kind="morph", capacity=index.capacity,
        nodes=root_keys.tolist(), scores=root_scores.tolist(),
        retained=retained.tolist(),
    )

    subject_ids = np.sort(
        np.concatenate([
            np.asarray(index.layers[0][r].members, dtype=np.int64) for r in retained
        ])
    )
    ref_scores = comparator.one_to_many(probe, index.references[subject_ids])
    ids, scores = _rank(subject_ids, ref_scores)
    _trace(
        trace, stage=2, kind="reference",
        subjects=subject_ids.tolist(), scores=ref_scores.tolist(),
        retained=ids.tolist(),
    )
    counts = (roots.shape[0], subject_ids.shape[0])
    return SearchResult(
        candidate_ids=ids,
        candidate_scores=scores,
        comparisons_per_stage=counts,
        total_comparisons=int(sum(counts)),
        decision=None,
    )


def search_multi_stage(
    probe: np.ndarray,
    index: CascadeIndex,
    config: SearchConfig,
    comparator,
    trace: list | None = None,
) -> SearchResult:
    """Cascaded filtering: every layer in turn, then the references.

    ``config.shortlist_sizes[i]`` is the number of layer-i nodes retained
    after that layer is scored; the children of retained nodes are the
    next stage's comparisons.
    """
    ks = config.shortlist_sizes
    if len(ks) != len(index.layers):
        raise ValueError(
            f"{len(ks)} shortlist sizes for a cascade with "
            f"{index.level_count} levels; expected {len(index.layers)}"
        )
    for i, k in enumerate(ks):
        if not 1 <= k <= len(index.layers[i]):
            raise ValueError(
                f"shortlist size {k} out of range for layer {i} "
                f"of {len(index.layers[i])} nodes"
            )

    counts = []
    retained = None
    for li, layer in enumerate(index.layers):
        if li == 0:
            node_idx = np.arange(len(layer), dtype=np.int64)
        else:
            node_idx = np.sort(
                np.concatenate([
                    np.asarray(index.layers[li - 1][r].children, dtype=np.int64)
                    for r in retained
                ])
            )
        node_scores = comparator.one_to_many(probe, index.layer_matrix(li)[node_idx])
        counts.append(int(node_idx.shape[0]))
        retained = _top(min(ks[li], node_idx.shape[0]), node_idx, node_scores)
        _trace(
            trace, stage=li + 1, kind="morph", capacity=index.capacity >> li,
            nodes=node_idx.tolist(), scores=node_scores.tolist(),
            retained=retained.tolist(),
        )

    subject_ids = np.sort(
        np.concatenate([
            np.asarray(index.layers[-1][r].members, dtype=np.int64) for r in retained
        ])
    )
    ref_scores = comparator.one_to_many(probe, index.references[subject_ids])
    counts.append(int(subject_ids.shape[0]))
    ids, scores = _rank(subject_ids, ref_scores)
    _trace(
        trace, stage=len(counts), kind="reference",
        subjects=subject_ids.tolist(), scores=ref_scores.tolist(),
        retained=ids.tolist(),
    )

    decision = None
    if config.open_set_threshold is not None:
        decision = (
            int(ids[0]) if scores[0] <= config.open_set_threshold else REJECTED
        )
    return SearchResult(
        candidate_ids=ids,
        candidate_scores=scores,
        comparisons_per_stage=tuple(counts),
        total_comparisons=int(sum(counts)),
        decision=decision,
    )


def predicted_workload_two_stage(n_subjects: int, capacity: int, k: int) -> int:
    """Comparison count N/n + k*n (ceil when n does not divide N)."""
    return math.ceil(n_subjects / capacity) + k * capacity


def predicted_workload_multi_stage(n_subjects: int, capacity: int, ks) -> int:
    """Comparison count N/n1 + sum of 2k over every post-root stage.

    The reference stage counts like any other: each retained capacity-2
    node expands to its two references.  The prediction matches the
    runtime counter when groups are full and every stage has at least k
    candidates to retain (k_1 <= N/n1 and k_next <= 2k).
    """
    if capacity not in (2, 4, 8):
        raise ValueError(f"capacity must be one of 2, 4, 8, got {capacity}")
    ks = tuple(int(k) for k in ks)
    if len(ks) != int(math.log2(capacity)):
        raise ValueError(
            f"{len(ks)} shortlist sizes for capacity {capacity}, "
            f"expected {int(math.log2(capacity))}"
        )
    return math.ceil(n_subjects / capacity) + 2 * sum(ks)


def decide_open_set(result: SearchResult, threshold: float) -> int:
    """Accept the rank-1 identity iff its score clears the threshold."""
    if result.candidate_ids.size == 0:
        raise ValueError("cannot decide on an empty candidate list")
    if result.candidate_scores[0] <= threshold:
        return int(result.candidate_ids[0])
    return REJECTED
