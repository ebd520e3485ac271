"""Cascade construction over morph groups, plus validation and persistence.

The index holds one layer of morph nodes per pairing round, coarsest
first: the root layer has capacity n1, each following layer half that,
down to capacity-2 nodes whose members point straight at the reference
layer.  The reference layer itself is the gallery's float64 reference
block; it is never serialized with the index, so loading an index
requires the gallery it was built from (a fingerprint check catches
stale combinations).
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import Gallery
from .errors import IndexFormatError
from .pairing import PairingMethod, iterate_pairing

INDEX_MAGIC = b"MIDXCASC"
INDEX_VERSION = 1

_HEADER = struct.Struct("<8sIIQII")


@dataclass
class MorphNode:
    """One fused sample: its contributors, child links, and 1-based level."""

    fused: np.ndarray
    members: tuple[int, ...]
    children: tuple[int, ...]
    level: int

    def __eq__(self, other) -> bool:
        if not isinstance(other, MorphNode):
            return NotImplemented
        return (
            self.members == other.members
            and self.children == other.children
            and self.level == other.level
            and np.array_equal(self.fused, other.fused)
        )


@dataclass
class CascadeIndex:
    """Layered morph nodes over a gallery's reference layer.

    ``layers[0]`` holds the capacity-n1 roots; each node's children index
    into the next layer, except capacity-2 nodes whose children are empty
    and whose members are reference-layer subject ids.
    """

    dimension: int
    capacity: int
    layers: list[list[MorphNode]]
    references: np.ndarray
    pairing: str
    fingerprint: bytes
    _matrices: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        self._matrices = [
            np.stack([node.fused for node in layer]) for layer in self.layers
        ]

    @property
    def subject_count(self) -> int:
        return self.references.shape[0]

    @property
    def level_count(self) -> int:
        # Counting the reference layer.
        return len(self.layers) + 1

    def layer_matrix(self, i: int) -> np.ndarray:
        """Stacked fused vectors of layer i, row-aligned with layers[i]."""
        return self._matrices[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, CascadeIndex):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.capacity == other.capacity
            and self.pairing == other.pairing
            and self.fingerprint == other.fingerprint
            and self.layers == other.layers
            and np.array_equal(self.references, other.references)
        )


def gallery_fingerprint(gallery: Gallery) -> bytes:
    """Digest of the reference layer as stored on disk (float32 rows)."""
    return hashlib.sha256(gallery.references.astype("<f4").tobytes()).digest()


def build_index(
    gallery: Gallery,
    method: PairingMethod,
    n1: int,
    comparator,
    fuser,
) -> CascadeIndex:
    """Build the cascade bottom-up from iterated capacity-2 pairings."""
    rounds = iterate_pairing(gallery, method, n1, comparator, fuser)
    layers: list[list[MorphNode]] = []
    for level, units in enumerate(reversed(rounds), start=1):
        leaf_morphs = level == len(rounds)
        layers.append(
            [
                MorphNode(
                    fused=u.vector,
                    members=u.members,
                    children=() if leaf_morphs else u.children,
                    level=level,
                )
                for u in units
            ]
        )
    return CascadeIndex(
        dimension=gallery.dimension,
        capacity=n1,
        layers=layers,
        references=gallery.references,
        pairing=method.describe(),
        fingerprint=gallery_fingerprint(gallery),
    )


@dataclass
class IndexValidationReport:
    ok: bool
    violations: list[str]


def validate_index(index: CascadeIndex) -> IndexValidationReport:
    """Check every structural invariant; failures are reported, not raised."""
    bad: list[str] = []
    n = index.subject_count
    expected_layers = int(math.log2(index.capacity))
    if len(index.layers) != expected_layers:
        bad.append(
            f"{len(index.layers)} layers for capacity {index.capacity}, "
            f"expected {expected_layers}"
        )

    for li, layer in enumerate(index.layers):
        cap = index.capacity >> li
        seen: list[int] = []
        last = li == len(index.layers) - 1
        for ni, node in enumerate(layer):
            tag = f"layer {li} node {ni}"
            if node.level != li + 1:
                bad.append(f"{tag}: level {node.level}, expected {li + 1}")
            if not node.members or len(node.members) > cap:
                bad.append(f"{tag}: {len(node.members)} members exceeds capacity {cap}")
            if tuple(sorted(node.members)) != node.members:
                bad.append(f"{tag}: members not sorted")
            if node.fused.shape != (index.dimension,):
                bad.append(f"{tag}: fused vector shape {node.fused.shape}")
            seen.extend(node.members)
            if last:
                if node.children:
                    bad.append(f"{tag}: leaf morph node carries child links")
            else:
                below = index.layers[li + 1]
                if any(c < 0 or c >= len(below) for c in node.children):
                    bad.append(f"{tag}: child index out of range")
                    continue
                child_union = tuple(
                    sorted(x for c in node.children for x in below[c].members)
                )
                if child_union != node.members:
                    bad.append(f"{tag}: members differ from union of child members")
        if sorted(seen) != list(range(n)):
            bad.append(f"layer {li}: member multiset is not the full subject set")
        if not last:
            linked = sorted(c for node in layer for c in node.children)
            if linked != list(range(len(index.layers[li + 1]))):
                bad.append(f"layer {li}: child links do not cover the next layer exactly once")

    return IndexValidationReport(ok=not bad, violations=bad)


def save_index(index: CascadeIndex, path: str) -> None:
    """Serialize all morph layers; the reference layer stays with the gallery."""
    out = bytearray()
    out += _HEADER.pack(
        INDEX_MAGIC,
        INDEX_VERSION,
        index.dimension,
        index.subject_count,
        index.capacity,
        len(index.layers),
    )
    descriptor = index.pairing.encode()
    out += struct.pack("<I", len(descriptor))
    out += descriptor
    out += index.fingerprint
    for layer in index.layers:
        out += struct.pack("<I", len(layer))
        for node in layer:
            out += struct.pack("<I", len(node.members))
            out += np.asarray(node.members, dtype="<u8").tobytes()
            out += struct.pack("<I", len(node.children))
            out += np.asarray(node.children, dtype="<u4").tobytes()
            out += node.fused.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(out)


class _Cursor:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.blob):
            raise IndexFormatError("index file truncated")
        piece = self.blob[self.pos:self.pos + size]
        self.pos += size
        return piece

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_index(path: str, gallery: Gallery) -> CascadeIndex:
    """Load an index and attach the reference layer of ``gallery``.

    The stored fingerprint must match the gallery's current references;
    a mismatch means the index is stale and is rejected.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise IndexFormatError("file shorter than the index header")
    magic, version, d, n, n1, layer_count = _HEADER.unpack_from(blob)
    if magic != INDEX_MAGIC:
        raise IndexFormatError(f"bad magic bytes {magic!r}")
    if version != INDEX_VERSION:
        raise IndexFormatError(f"unsupported index version {version}")
    if d != gallery.dimension:
        raise IndexFormatError(
            f"index dimension {d} does not match gallery dimension {gallery.dimension}"
        )
    if n != gallery.subject_count:
        raise IndexFormatError(
            f"index subject count {n} does not match gallery size {gallery.subject_count}"
        )

    cur = _Cursor(blob)
    cur.pos = _HEADER.size
    descriptor = cur.take(cur.u32()).decode()
    fingerprint = cur.take(32)
    if fingerprint != gallery_fingerprint(gallery):
        raise IndexFormatError("index is stale: gallery references changed since build")

    layers: list[list[MorphNode]] = []
    for li in range(layer_count):
        count = cur.u32()
        layer = []
        for _ in range(count):
            m = cur.u32()
            members = tuple(
                int(x) for x in np.frombuffer(cur.take(8 * m), dtype="<u8")
            )
            ch = cur.u32()
            children = tuple(
                int(x) for x in np.frombuffer(cur.take(4 * ch), dtype="<u4")
            )
            vec = np.frombuffer(cur.take(4 * d), dtype="<f4").astype(np.float64)
            layer.append(MorphNode(fused=vec, members=members, children=children, level=li + 1))
        layers.append(layer)
    if cur.pos != len(blob):
        raise IndexFormatError("trailing bytes after the last node record")

    return CascadeIndex(
        dimension=d,
        capacity=n1,
        layers=layers,
        references=gallery.references,
        pairing=descriptor,
        fingerprint=fingerprint,
    )
