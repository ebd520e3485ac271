"""Domain types, comparator/fusion contracts, and the synthetic modality.

Recognition systems are treated as black boxes with two capabilities:
comparing a pair of samples into a dissimilarity score, and fusing several
samples into one at signal level.  The synthetic modality implemented here
keeps both operations cheap and fully deterministic so retrieval behaviour
can be verified at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFusionError, DimensionMismatchError

# Category cardinalities of the synthetic soft-biometric attributes.
SEX_CATEGORIES = 2
AGE_BINS = 4
SKIN_CATEGORIES = 3


def _as_vector(x: np.ndarray) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-d sample vector, got shape {v.shape}")
    return v


def _as_sample_block(x: np.ndarray, d: int | None = None) -> np.ndarray:
    block = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if block.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d sample block, got shape {block.shape}")
    if d is not None and block.shape[1] != d:
        raise DimensionMismatchError(
            f"sample block has dimension {block.shape[1]}, expected {d}"
        )
    return block


class EuclideanComparator:
    """Euclidean distance on sample vectors; lower means more similar.

    ``compare`` and ``one_to_many`` reduce each coordinate difference with
    the same contiguous summation, so a score computed one pair at a time
    is bit-identical to the corresponding entry of a block computation.
    """

    def compare(self, a: np.ndarray, b: np.ndarray) -> float:
        a = _as_vector(a)
        b = _as_vector(b)
        if a.shape[0] != b.shape[0]:
            raise DimensionMismatchError(
                f"cannot compare vectors of dimension {a.shape[0]} and {b.shape[0]}"
            )
        diff = a - b
        return float(np.sqrt(np.sum(diff * diff)))

    def one_to_many(self, probe: np.ndarray, block: np.ndarray) -> np.ndarray:
        """Distances from one probe to every row of an (m, d) sample block."""
        probe = _as_vector(probe)
        block = _as_sample_block(block, probe.shape[0])
        diff = block - probe
        return np.sqrt(np.sum(diff * diff, axis=1))

    def pairwise(self, block: np.ndarray) -> np.ndarray:
        """Full (m, m) distance matrix over the rows of a sample block."""
        block = _as_sample_block(block)
        out = np.empty((block.shape[0], block.shape[0]), dtype=np.float64)
        for i in range(block.shape[0]):
            out[i] = self.one_to_many(block[i], block)
        return out


def _renormalize(mean: np.ndarray) -> np.ndarray:
    norm = float(np.sqrt(np.sum(mean * mean)))
    if norm < 1e-12:
        raise DegenerateFusionError("fusion parents cancel out; mean has no direction")
    return mean / norm


def _parent_stack(parents) -> np.ndarray:
    stack = np.asarray(parents, dtype=np.float64)
    if stack.ndim == 1:
        raise DimensionMismatchError("fuse expects a list of vectors, not a single vector")
    if stack.ndim != 2 or stack.shape[0] == 0:
        raise DimensionMismatchError(f"cannot fuse parent block of shape {stack.shape}")
    return stack


@dataclass(frozen=True)
class MeanFuser:
    """Signal-level fusion: arithmetic mean of the parents, renormalized.

    Every parent contributes with equal weight, so for two parents the
    fused sample is equidistant from both.  A single parent, or a set of
    identical parents, is returned unchanged.
    """

    def fuse(self, parents) -> np.ndarray:
        stack = _parent_stack(parents)
        if stack.shape[0] == 1 or bool((stack == stack[0]).all()):
            return stack[0].copy()
        return _renormalize(stack.mean(axis=0))


@dataclass(frozen=True)
class WeightedMeanFuser:
    """Deliberately unbalanced fusion used to probe contributor symmetry.

    ``weights`` holds one positive weight per parent, applied in parent
    order before renormalization.  With weights (0.8, 0.2) the fused
    sample sits much closer to the first parent.
    """

    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.weights) == 0 or any(w <= 0 for w in self.weights):
            raise ValueError("weights must be a non-empty tuple of positive reals")

    def fuse(self, parents) -> np.ndarray:
        stack = _parent_stack(parents)
        if stack.shape[0] == 1:
            return stack[0].copy()
        if stack.shape[0] != len(self.weights):
            raise DimensionMismatchError(
                f"{stack.shape[0]} parents passed to a {len(self.weights)}-weight fuser"
            )
        w = np.asarray(self.weights, dtype=np.float64)
        mean = (w[:, None] * stack).sum(axis=0) / w.sum()
        return _renormalize(mean)


@dataclass(frozen=True)
class SyntheticModelParams:
    """Parameters of the synthetic embedding modality.

    Identity centroids are drawn uniformly on the unit hypersphere; every
    sample of an identity is its centroid plus iid Gaussian noise of
    standard deviation ``noise_sigma`` per coordinate, renormalized to
    unit length.  ``unenrolled_fraction`` of the identities contribute
    probes only, to support open-set trials.
    """

    n_subjects: int = 1024
    dimension: int = 128
    centroid_seed: int = 1
    noise_seed: int = 2
    noise_sigma: float = 0.05
    probes_per_subject: int = 1
    unenrolled_fraction: float = 0.0

    def __post_init__(self):
        if self.n_subjects < 2:
            raise ValueError("n_subjects must be at least 2")
        if self.dimension < 2:
            raise ValueError("dimension must be at least 2")
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be positive")
        if self.probes_per_subject < 0:
            raise ValueError("probes_per_subject must be non-negative")
        if not 0.0 <= self.unenrolled_fraction < 1.0:
            raise ValueError("unenrolled_fraction must lie in [0, 1)")


@dataclass
class Gallery:
    """Enrolled references plus a probe partition and per-identity attributes.

    Subject ids are dense integers: row i of ``references`` belongs to
    subject i.  Probe owners are subject ids; owners >= subject_count are
    unenrolled identities that appear only as probes and are flagged in
    ``probe_unenrolled``.  Attribute columns are sex, age_bin, skin_tone.
    """

    dimension: int
    references: np.ndarray        # (N, d) float64
    attributes: np.ndarray        # (N, 3) uint8
    probes: np.ndarray            # (P, d) float64
    probe_owners: np.ndarray      # (P,) int64
    probe_unenrolled: np.ndarray  # (P,) bool
    probe_attributes: np.ndarray  # (P, 3) uint8

    def __post_init__(self):
        n, p = self.references.shape[0], self.probes.shape[0]
        if n < 2:
            raise ValueError("a gallery needs at least 2 enrolled subjects")
        if self.references.shape != (n, self.dimension):
            raise DimensionMismatchError("reference block disagrees with dimension")
        if self.probes.shape != (p, self.dimension):
            raise DimensionMismatchError("probe block disagrees with dimension")
        if self.attributes.shape != (n, 3) or self.probe_attributes.shape != (p, 3):
            raise ValueError("attribute blocks must have 3 columns")
        if self.probe_owners.shape != (p,) or self.probe_unenrolled.shape != (p,):
            raise ValueError("probe bookkeeping arrays disagree with probe count")
        enrolled = self.probe_owners < n
        if np.any(enrolled == self.probe_unenrolled):
            raise ValueError("probe_unenrolled flags disagree with owner ids")
        if p and self.probe_owners.min() < 0:
            raise ValueError("probe owners must be non-negative")

    @property
    def subject_count(self) -> int:
        return self.references.shape[0]

    @property
    def probe_count(self) -> int:
        return self.probes.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Gallery):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and np.array_equal(self.references, other.references)
            and np.array_equal(self.attributes, other.attributes)
            and np.array_equal(self.probes, other.probes)
            and np.array_equal(self.probe_owners, other.probe_owners)
            and np.array_equal(self.probe_unenrolled, other.probe_unenrolled)
            and np.array_equal(self.probe_attributes, other.probe_attributes)
        )


def _unit_rows(block: np.ndarray) -> np.ndarray:
    return block / np.sqrt(np.sum(block * block, axis=1))[:, None]


def _derive_attributes(centroids: np.ndarray) -> np.ndarray:
    """Carve categorical attributes out of the first three centroid coordinates.

    Bin edges are empirical quantiles over the identity population, so the
    categories are balanced and attribute agreement correlates with
    geometric closeness of the centroids.
    """
    attrs = np.empty((centroids.shape[0], 3), dtype=np.uint8)
    attrs[:, 0] = (centroids[:, 0] > 0.0).astype(np.uint8)
    age_edges = np.quantile(centroids[:, 1], [0.25, 0.5, 0.75])
    attrs[:, 1] = np.searchsorted(age_edges, centroids[:, 1]).astype(np.uint8)
    skin_edges = np.quantile(centroids[:, 2], [1.0 / 3.0, 2.0 / 3.0])
    attrs[:, 2] = np.searchsorted(skin_edges, centroids[:, 2]).astype(np.uint8)
    return attrs


def generate_gallery(params: SyntheticModelParams) -> Gallery:
    """Draw a synthetic gallery; a pure function of the two seeds.

    The last round(unenrolled_fraction * n_subjects) identities are
    withheld from enrolment: they get no reference, their probes carry
    owner ids past the enrolled range and are flagged unenrolled.  Noise
    is drawn in a fixed order (references first, then probes grouped by
    owner) from the noise_seed stream.
    """
    n_total = params.n_subjects
    n_unenrolled = int(round(params.unenrolled_fraction * n_total))
    n_enrolled = n_total - n_unenrolled
    if n_enrolled < 2:
        raise ValueError("unenrolled_fraction leaves fewer than 2 enrolled subjects")

    centroid_rng = np.random.default_rng(params.centroid_seed)
    centroids = _unit_rows(centroid_rng.standard_normal((n_total, params.dimension)))
    attrs = _derive_attributes(centroids)

    noise_rng = np.random.default_rng(params.noise_seed)

    def draw(base: np.ndarray) -> np.ndarray:
        noisy = base + params.noise_sigma * noise_rng.standard_normal(base.shape)
        return _unit_rows(noisy)

    references = draw(centroids[:n_enrolled])
    owners = np.repeat(np.arange(n_total, dtype=np.int64), params.probes_per_subject)
    probes = draw(centroids[owners]) if owners.size else np.empty((0, params.dimension))

    return Gallery(
        dimension=params.dimension,
        references=references,
        attributes=attrs[:n_enrolled],
        probes=probes,
        probe_owners=owners,
        probe_unenrolled=owners >= n_enrolled,
        probe_attributes=attrs[owners] if owners.size else np.empty((0, 3), dtype=np.uint8),
    )
