"""Embedding store: precomputed feature vectors keyed by image id.

Binary layout (little-endian)::

    b"EMB1" | u32 dim | u32 count | count x (u16 id_len | id utf-8 | dim x f32)

A CSV variant with rows ``id,v0,...,v{dim-1}`` (no header) is read
interchangeably; it is selected by a ``.csv`` suffix.
"""
from __future__ import annotations

import csv
import mmap
import os
import struct
from pathlib import Path

import numpy as np

from ..errors import CorruptRecord, DimMismatch, UnknownImageId
from .base import FeatureVector, HANDCRAFTED, params_digest

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")
_IDLEN = struct.Struct("<H")

_KNOWN = {m.lower(): m for m in HANDCRAFTED + ("VGG16", "VGG19")}


def method_from_path(path) -> str:
    """``vgg16.emb`` -> ``VGG16``; unknown stems are external method names."""
    stem = Path(path).name.split(".")[0]
    return _KNOWN.get(stem.lower(), stem)


class EmbeddingStore:
    """Read-only view over an embedding file; safe for concurrent readers."""

    def __init__(self, path, method=None, digest=None):
        self.path = Path(path)
        self.method = method or method_from_path(self.path)
        self._mmap = None
        self._vectors = None
        self._offsets = {}
        if self.path.suffix.lower() == ".csv":
            self._load_csv()
        else:
            self._load_binary()
        self.params_digest = digest or params_digest(self.method, {"dim": self.dim})

    def _load_binary(self):
        size = os.path.getsize(self.path)
        if size < _HEADER.size:
            raise CorruptRecord(f"{self.path}: truncated header")
        with open(self.path, "rb") as fh:
            self._mmap = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ)
        buf = self._mmap
        magic, self.dim, count = _HEADER.unpack_from(buf, 0)
        if magic != MAGIC:
            raise CorruptRecord(f"{self.path}: bad magic {magic!r}")
        if self.dim == 0:
            raise CorruptRecord(f"{self.path}: zero dimension")
        rec_bytes = 4 * self.dim
        pos = _HEADER.size
        for i in range(count):
            if pos + _IDLEN.size > size:
                raise CorruptRecord(f"{self.path}: record {i} truncated")
            (n,) = _IDLEN.unpack_from(buf, pos)
            pos += _IDLEN.size
            try:
                image_id = bytes(buf[pos:pos + n]).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorruptRecord(f"{self.path}: record {i} id is not UTF-8") from exc
            pos += n
            remaining = size - pos
            if remaining < rec_bytes:
                if i == count - 1 and remaining % 4 == 0 and remaining > 0:
                    raise DimMismatch(f"{self.path}: record {image_id!r} has "
                                      f"{remaining // 4} values, header says {self.dim}")
                raise CorruptRecord(f"{self.path}: record {image_id!r} truncated")
            if image_id in self._offsets:
                raise CorruptRecord(f"{self.path}: duplicate id {image_id!r}")
            self._offsets[image_id] = pos
            pos += rec_bytes
        if pos != size:
            raise CorruptRecord(f"{self.path}: {size - pos} trailing bytes after {count} records")

    def _load_csv(self):
        self._vectors = {}
        self.dim = None
        with open(self.path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                try:
                    values = np.array([float(v) for v in row[1:]], dtype=np.float64)
                except ValueError as exc:
                    raise CorruptRecord(f"{self.path}:{lineno}: {exc}") from exc
                if self.dim is None:
                    if values.size == 0:
                        raise CorruptRecord(f"{self.path}:{lineno}: empty record")
                    self.dim = values.size
                elif values.size != self.dim:
                    raise DimMismatch(f"{self.path}:{lineno}: record {row[0]!r} has "
                                      f"{values.size} values, expected {self.dim}")
                if row[0] in self._vectors:
                    raise CorruptRecord(f"{self.path}:{lineno}: duplicate id {row[0]!r}")
                self._vectors[row[0]] = values
        if self.dim is None:
            raise CorruptRecord(f"{self.path}: no records")

    @property
    def ids(self):
        return list(self._vectors if self._vectors is not None else self._offsets)

    def __len__(self):
        return len(self._vectors if self._vectors is not None else self._offsets)

    def __contains__(self, image_id):
        return image_id in (self._vectors if self._vectors is not None else self._offsets)

    def values(self, image_id) -> np.ndarray:
        if self._vectors is not None:
            try:
                return self._vectors[image_id]
            except KeyError:
                raise UnknownImageId(f"{image_id!r} not in {self.path}") from None
        try:
            off = self._offsets[image_id]
        except KeyError:
            raise UnknownImageId(f"{image_id!r} not in {self.path}") from None
        return np.frombuffer(self._mmap, dtype="<f4", count=self.dim, offset=off).astype(np.float64)

    def get(self, image_id) -> FeatureVector:
        return FeatureVector(self.method, self.params_digest, self.values(image_id))

    def close(self):
        if self._mmap is not None:
            self._mmap.close()
            self._mmap = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def load_embedding(store, image_id) -> FeatureVector:
    """Fetch one vector from an ``EmbeddingStore`` or a store path."""
    if not isinstance(store, EmbeddingStore):
        with EmbeddingStore(store) as opened:
            return opened.get(image_id)
    return store.get(image_id)


def _encode_record(image_id, values, dim):
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    if vals.size != dim:
        raise DimMismatch(f"record {image_id!r} has {vals.size} values, store dim is {dim}")
    raw = image_id.encode("utf-8")
    return _IDLEN.pack(len(raw)) + raw + vals.astype("<f4").tobytes()


def write_store(path, records, dim):
    """Write ``records`` (iterable of ``(id, values)``) as a binary store."""
    body = [_encode_record(i, v, dim) for i, v in records]
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, dim, len(body)))
        fh.writelines(body)
    os.replace(tmp, path)


def append_store(path, records):
    """Append records to an existing binary store, updating its count."""
    with open(path, "r+b") as fh:
        magic, dim, count = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != MAGIC:
            raise CorruptRecord(f"{path}: bad magic {magic!r}")
        body = [_encode_record(i, v, dim) for i, v in records]
        fh.seek(0, os.SEEK_END)
        fh.writelines(body)
        fh.seek(0)
        fh.write(_HEADER.pack(MAGIC, dim, count + len(body)))


def write_csv_store(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for image_id, values in records:
            writer.writerow([image_id] + [repr(float(v)) for v in np.asarray(values).ravel()])
