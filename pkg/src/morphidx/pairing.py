"""Pair selection: cost matrices, assignment solve, and iterated grouping.

Morph groups are built bottom-up.  A first round pairs subjects two by
two; for capacities 4 and 8 the resulting fused samples (or merged
attribute profiles) are paired again, doubling group size each round.
Three selection methods are supported: random shuffling, soft-biometric
attribute closeness, and comparison-score closeness.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import Gallery
from .errors import DegenerateFusionError, GalleryFormatError
from .lap import solve_lap

# Forbidden-edge marker: the largest finite float64 value.
SENTINEL = float(np.finfo(np.float64).max)


@dataclass(frozen=True)
class CostMatrix:
    """Square pairing-cost matrix with the forbidden-edge sentinel on the diagonal."""

    costs: np.ndarray

    def __post_init__(self):
        c = self.costs
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"cost matrix must be square, got shape {c.shape}")
        if not np.all(np.diag(c) == SENTINEL):
            raise ValueError("diagonal entries must carry the sentinel")
        off = c[~np.eye(c.shape[0], dtype=bool)]
        if off.size and (not np.all(np.isfinite(off)) or off.min() < 0):
            raise ValueError("off-diagonal costs must be finite and non-negative")

    @property
    def n(self) -> int:
        return self.costs.shape[0]


@dataclass(frozen=True)
class Assignment:
    """A fixed-point-free bijection of {0..n-1}, stored as mapping[i] = f(i)."""

    mapping: np.ndarray

    def __post_init__(self):
        f = self.mapping
        n = f.shape[0]
        if not np.array_equal(np.sort(f), np.arange(n)):
            raise ValueError("mapping is not a permutation")
        if np.any(f == np.arange(n)):
            raise ValueError("mapping contains a fixed point")

    @property
    def n(self) -> int:
        return self.mapping.shape[0]


@dataclass(frozen=True)
class MorphGroup:
    """Subjects fused into one morph; members are sorted subject ids."""

    members: tuple[int, ...]

    @property
    def capacity(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class RandomPairing:
    """Shuffle-based grouping; a single generator seeded once drives every round."""

    seed: int

    def describe(self) -> str:
        return f"random(seed={self.seed})"


@dataclass(frozen=True)
class SoftBiometricPairing:
    """Grouping by attribute closeness with weights (sex, age, skin)."""

    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def describe(self) -> str:
        w = ",".join(f"{x:g}" for x in self.weights)
        return f"softbio(w={w})"


@dataclass(frozen=True)
class SimilarityPairing:
    """Grouping by comparison-score closeness; morphs are re-scored each round."""

    def describe(self) -> str:
        return "similarity"


PairingMethod = RandomPairing | SoftBiometricPairing | SimilarityPairing


@dataclass(frozen=True)
class PairedUnit:
    """One group of a pairing round: its members, fused sample, and children.

    ``children`` are indices into the previous round's unit list (or
    subject ids for the first round).
    """

    members: tuple[int, ...]
    vector: np.ndarray
    children: tuple[int, ...]


def _similarity_costs(block: np.ndarray, comparator) -> CostMatrix:
    costs = comparator.pairwise(block)
    np.fill_diagonal(costs, SENTINEL)
    return CostMatrix(costs)


def _softbio_costs(attrs: np.ndarray, weights) -> CostMatrix:
    w_sex, w_age, w_skin = (float(w) for w in weights)
    a = np.asarray(attrs, dtype=np.int64)
    costs = (
        w_sex * (a[:, None, 0] != a[None, :, 0])
        + w_age * np.abs(a[:, None, 1] - a[None, :, 1])
        + w_skin * (a[:, None, 2] != a[None, :, 2])
    ).astype(np.float64)
    np.fill_diagonal(costs, SENTINEL)
    return CostMatrix(costs)


def build_similarity_cost_matrix(gallery: Gallery, comparator) -> CostMatrix:
    """Pairing costs from reference-to-reference comparison scores."""
    return _similarity_costs(gallery.references, comparator)


def build_softbio_cost_matrix(gallery: Gallery, weights=(1.0, 1.0, 1.0)) -> CostMatrix:
    """Pairing costs from weighted attribute disagreement.

    Sex and skin tone contribute their weight when they differ; age
    contributes its weight times the bin distance.
    """
    if gallery.attributes.shape != (gallery.subject_count, 3):
        raise ValueError("gallery carries no complete attribute table")
    return _softbio_costs(gallery.attributes, weights)


def solve_assignment(c: CostMatrix) -> Assignment:
    """Minimum-total-cost fixed-point-free bijection over the cost matrix."""
    if c.n < 2:
        raise ValueError("assignment needs at least 2 subjects")
    return Assignment(solve_lap(c.costs))


def assignment_to_groups(f: Assignment, c: CostMatrix) -> list[MorphGroup]:
    """Break a bijection into disjoint pairs.

    Mutual pairs (f(a) = b and f(b) = a) are kept.  Subjects on longer
    cycles are re-paired greedily by ascending symmetrized cost; an odd
    leftover count yields one capacity-1 group.  Groups come back sorted
    by their smallest member.
    """
    n = f.n
    mapping = f.mapping
    groups: list[tuple[int, ...]] = []
    leftover = []
    for a in range(n):
        b = int(mapping[a])
        if mapping[b] == a:
            if a < b:
                groups.append((a, b))
        else:
            leftover.append(a)

    if leftover:
        costs = c.costs
        candidates = sorted(
            (0.5 * (float(costs[a, b]) + float(costs[b, a])), a, b)
            for i, a in enumerate(leftover)
            for b in leftover[i + 1:]
        )
        free = set(leftover)
        for _, a, b in candidates:
            if a in free and b in free:
                groups.append((a, b))
                free.discard(a)
                free.discard(b)
        for a in sorted(free):
            groups.append((a,))

    groups.sort(key=lambda g: g[0])
    return [MorphGroup(g) for g in groups]


def _majority(values: np.ndarray) -> int:
    """Most frequent value; ties resolved by the earliest member holding one."""
    counts = np.bincount(values)
    top = counts.max()
    for v in values:
        if counts[v] == top:
            return int(v)
    raise AssertionError("unreachable")


def _group_profile(members: tuple[int, ...], attrs: np.ndarray) -> list[int]:
    a = attrs[np.asarray(members, dtype=np.int64)]
    return [
        _majority(a[:, 0]),
        int(math.floor(a[:, 1].mean() + 0.5)),
        _majority(a[:, 2]),
    ]


def _quantize(vec: np.ndarray) -> np.ndarray:
    # Morph samples are stored as float32 on disk; narrowing at creation
    # keeps in-memory and reloaded indexes bit-identical.
    return vec.astype("<f4").astype(np.float64)


def _pair_round(
    members: list[tuple[int, ...]],
    vectors: np.ndarray,
    method: PairingMethod,
    attrs: np.ndarray,
    comparator,
    rng: np.random.Generator | None,
) -> list[tuple[int, ...]]:
    """Group the current units two by two; returns tuples of unit indices."""
    m = len(members)
    if m == 1:
        return [(0,)]
    if isinstance(method, RandomPairing):
        perm = rng.permutation(m)
        pairs = [tuple(sorted(perm[i:i + 2])) for i in range(0, m - 1, 2)]
        if m % 2:
            pairs.append((int(perm[-1]),))
        return [tuple(int(x) for x in p) for p in pairs]
    if isinstance(method, SimilarityPairing):
        costs = _similarity_costs(vectors, comparator)
    else:
        profiles = np.asarray([_group_profile(g, attrs) for g in members], dtype=np.int64)
        costs = _softbio_costs(profiles, method.weights)
    plan = assignment_to_groups(solve_assignment(costs), costs)
    return [g.members for g in plan]


def iterate_pairing(
    gallery: Gallery,
    method: PairingMethod,
    capacity: int,
    comparator,
    fuser,
) -> list[list[PairedUnit]]:
    """Run log2(capacity) pairing rounds, fusing after each.

    Returns one unit list per round, finest first: round 0 holds the
    capacity-2 groups, the last round the capacity-n groups.  Unit lists
    are ordered by smallest member id, so indices are deterministic.
    """
    if capacity not in (2, 4, 8):
        raise ValueError(f"morph capacity must be one of 2, 4, 8, got {capacity}")
    rng = np.random.default_rng(method.seed) if isinstance(method, RandomPairing) else None

    prev_members = [(i,) for i in range(gallery.subject_count)]
    prev_vectors = gallery.references
    rounds: list[list[PairedUnit]] = []
    for _ in range(int(math.log2(capacity))):
        plan = _pair_round(prev_members, prev_vectors, method, gallery.attributes, comparator, rng)
        plan.sort(key=lambda pair: min(prev_members[c][0] for c in pair))
        units = []
        for pair in plan:
            children = tuple(sorted(int(c) for c in pair))
            combined = tuple(sorted(x for c in children for x in prev_members[c]))
            try:
                fused = _quantize(fuser.fuse(np.stack([prev_vectors[c] for c in children])))
            except DegenerateFusionError as exc:
                raise DegenerateFusionError(f"group {combined}: {exc}") from None
            units.append(PairedUnit(members=combined, vector=fused, children=children))
        rounds.append(units)
        prev_members = [u.members for u in units]
        prev_vectors = np.stack([u.vector for u in units])
    return rounds


def pair_subjects(
    gallery: Gallery,
    method: PairingMethod,
    capacity: int,
    comparator,
    fuser,
) -> list[MorphGroup]:
    """Partition the subjects into morph groups of the requested capacity."""
    rounds = iterate_pairing(gallery, method, capacity, comparator, fuser)
    return [MorphGroup(u.members) for u in rounds[-1]]


def save_groups(groups: list[MorphGroup], path: str) -> None:
    """Persist a grouping as CSV rows ``group_id,capacity,member_ids...``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group_id", "capacity", "member_ids"])
        for gid, group in enumerate(groups):
            writer.writerow([gid, group.capacity, *group.members])


def load_groups(path: str) -> list[MorphGroup]:
    groups = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["group_id", "capacity"]:
            raise GalleryFormatError("malformed grouping header")
        for lineno, row in enumerate(reader, start=2):
            try:
                cap = int(row[1])
                members = tuple(int(x) for x in row[2:])
            except (IndexError, ValueError) as exc:
                raise GalleryFormatError(f"line {lineno}: {exc}") from None
            if cap != len(members):
                raise GalleryFormatError(f"line {lineno}: capacity disagrees with member count")
            groups.append(MorphGroup(members))
    return groups
