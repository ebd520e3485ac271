"""Sample-file persistence: CSV and binary gallery encodings.

Both formats store one record per sample (references first, ascending
subject id, then probes in gallery order).  CSV carries float64 values in
shortest round-trip decimal form; the binary format stores vectors as
little-endian float32, so saving narrows values that are not exactly
representable in 32 bits.  Loading widens back to float64.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

from .core import Gallery
from .errors import GalleryFormatError

BINARY_MAGIC = b"MIDX"
BINARY_VERSION = 1

ROLE_REFERENCE = 0
ROLE_PROBE = 1
ROLE_PROBE_UNENROLLED = 2

_ROLE_NAMES = {
    ROLE_REFERENCE: "reference",
    ROLE_PROBE: "probe",
    ROLE_PROBE_UNENROLLED: "probe_unenrolled",
}
_ROLE_CODES = {name: code for code, name in _ROLE_NAMES.items()}

_HEADER = struct.Struct("<4sIIQ")


def _record_dtype(d: int) -> np.dtype:
    return np.dtype(
        [("id", "<u8"), ("role", "u1"), ("attrs", "u1", (3,)), ("v", "<f4", (d,))]
    )


def _gallery_records(gallery: Gallery):
    """Yield (id, role_code, attrs, vector) in canonical file order."""
    for i in range(gallery.subject_count):
        yield i, ROLE_REFERENCE, gallery.attributes[i], gallery.references[i]
    for j in range(gallery.probe_count):
        role = ROLE_PROBE_UNENROLLED if gallery.probe_unenrolled[j] else ROLE_PROBE
        yield int(gallery.probe_owners[j]), role, gallery.probe_attributes[j], gallery.probes[j]


def _records_to_gallery(ids, roles, attrs, vectors, dimension: int) -> Gallery:
    ids = np.asarray(ids, dtype=np.int64)
    roles = np.asarray(roles, dtype=np.uint8)
    attrs = np.asarray(attrs, dtype=np.uint8).reshape(len(ids), 3)
    vectors = np.asarray(vectors, dtype=np.float64).reshape(len(ids), dimension)

    ref_mask = roles == ROLE_REFERENCE
    ref_ids = ids[ref_mask]
    n = ref_ids.size
    if n < 2:
        raise GalleryFormatError("file holds fewer than 2 reference records")
    if np.unique(ref_ids).size != n:
        raise GalleryFormatError("duplicate subject ids among reference records")
    if ref_ids.min() != 0 or ref_ids.max() != n - 1:
        raise GalleryFormatError("reference subject ids must be dense 0..N-1")

    order = np.argsort(ref_ids, kind="stable")
    references = vectors[ref_mask][order]
    ref_attrs = attrs[ref_mask][order]

    probe_mask = ~ref_mask
    owners = ids[probe_mask]
    unenrolled = roles[probe_mask] == ROLE_PROBE_UNENROLLED
    if np.any((owners < n) & unenrolled):
        raise GalleryFormatError("unenrolled probe carries an enrolled owner id")
    if np.any((owners >= n) & ~unenrolled):
        raise GalleryFormatError("probe owner id has no reference record")

    return Gallery(
        dimension=dimension,
        references=references,
        attributes=ref_attrs,
        probes=vectors[probe_mask],
        probe_owners=owners,
        probe_unenrolled=unenrolled,
        probe_attributes=attrs[probe_mask],
    )


def _save_csv(gallery: Gallery, path: str) -> None:
    header = ["subject_id", "role", "attr_sex", "attr_age", "attr_skin"]
    header += [f"v{i}" for i in range(gallery.dimension)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for sid, role, attrs, vec in _gallery_records(gallery):
            row = [sid, _ROLE_NAMES[role], int(attrs[0]), int(attrs[1]), int(attrs[2])]
            row += [repr(float(x)) for x in vec]
            writer.writerow(row)


def _load_csv(path: str) -> Gallery:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GalleryFormatError("empty sample file") from None
        if header[:5] != ["subject_id", "role", "attr_sex", "attr_age", "attr_skin"]:
            raise GalleryFormatError("malformed CSV header")
        d = len(header) - 5
        if d < 1 or header[5:] != [f"v{i}" for i in range(d)]:
            raise GalleryFormatError("malformed CSV vector columns")

        ids, roles, attrs, vectors = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise GalleryFormatError(
                    f"line {lineno}: {len(row)} fields, header declares {len(header)}"
                )
            try:
                ids.append(int(row[0]))
                roles.append(_ROLE_CODES[row[1]])
                attrs.append([int(row[2]), int(row[3]), int(row[4])])
                vectors.append([float(x) for x in row[5:]])
            except (KeyError, ValueError) as exc:
                raise GalleryFormatError(f"line {lineno}: {exc}") from None
    if not ids:
        raise GalleryFormatError("CSV holds no records")
    return _records_to_gallery(ids, roles, attrs, vectors, d)


def _save_binary(gallery: Gallery, path: str) -> None:
    count = gallery.subject_count + gallery.probe_count
    records = np.empty(count, dtype=_record_dtype(gallery.dimension))
    for row, (sid, role, attrs, vec) in zip(records, _gallery_records(gallery)):
        row["id"] = sid
        row["role"] = role
        row["attrs"] = attrs
        row["v"] = vec.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, gallery.dimension, count))
        fh.write(records.tobytes())


def _load_binary(path: str) -> Gallery:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise GalleryFormatError("file shorter than the binary header")
    magic, version, d, count = _HEADER.unpack_from(blob)
    if magic != BINARY_MAGIC:
        raise GalleryFormatError(f"bad magic bytes {magic!r}")
    if version != BINARY_VERSION:
        raise GalleryFormatError(f"unsupported format version {version}")
    if d < 1:
        raise GalleryFormatError(f"invalid dimension {d}")
    dtype = _record_dtype(d)
    expected = _HEADER.size + count * dtype.itemsize
    if len(blob) != expected:
        raise GalleryFormatError(
            f"record count mismatch: header declares {count} records "
            f"({expected} bytes), file holds {len(blob)}"
        )
    records = np.frombuffer(blob, dtype=dtype, count=count, offset=_HEADER.size)
    if np.any(records["role"] > ROLE_PROBE_UNENROLLED):
        raise GalleryFormatError("unknown role code in record")
    return _records_to_gallery(
        records["id"], records["role"], records["attrs"],
        records["v"].astype(np.float64), d,
    )


def save_samples(gallery: Gallery, path: str, fmt: str = "binary") -> None:
    """Write a gallery to ``path`` as ``fmt`` in {"csv", "binary"}."""
    if fmt == "csv":
        _save_csv(gallery, path)
    elif fmt == "binary":
        _save_binary(gallery, path)
    else:
        raise ValueError(f"unknown sample format {fmt!r}")


def load_samples(path: str, fmt: str = "binary") -> Gallery:
    """Read a gallery written by :func:`save_samples`."""
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "binary":
        return _load_binary(path)
    raise ValueError(f"unknown sample format {fmt!r}")
