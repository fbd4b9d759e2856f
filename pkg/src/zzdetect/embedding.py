"""Sentence-embedding boundary: stub encoder, pixel scaling, ZZEB file format.

The model never talks to an encoder directly; it consumes 512-dim vectors.
`stub_encode` is a deterministic offline stand-in for a real sentence encoder
so the whole pipeline runs with no external checkpoint. Real embeddings enter
through ZZEB files produced by the exporter.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import LABEL_AI, LABEL_HUMAN, Chunk
from .errors import (
    BadMagicError,
    BadVersionError,
    DataError,
    DimensionError,
    FileFormatError,
    TruncatedFileError,
)
from .prng import philox

EMBED_DIM = 512

ZZEB_MAGIC = b"ZZEB"
ZZEB_VERSION = 1

_LABEL_TO_BYTE = {LABEL_HUMAN: 0, LABEL_AI: 1, None: 255}
_BYTE_TO_LABEL = {0: LABEL_HUMAN, 1: LABEL_AI, 255: None}


@dataclass
class EmbeddingRecord:
    """One chunk's embedding vector plus its id and optional label."""

    chunk_id: str
    label: str | None
    vector: np.ndarray

    def __post_init__(self) -> None:
        if not self.chunk_id:
            raise DataError("embedding record has empty chunk_id")
        if self.label is not None and self.label not in _LABEL_TO_BYTE:
            raise DataError(f"record {self.chunk_id!r}: bad label {self.label!r}")
        self.vector = np.asarray(self.vector, dtype=np.float32)
        if self.vector.shape != (EMBED_DIM,):
            raise DataError(
                f"record {self.chunk_id!r}: vector shape {self.vector.shape}, "
                f"expected ({EMBED_DIM},)"
            )
        if not np.all(np.isfinite(self.vector)):
            raise DataError(f"record {self.chunk_id!r}: vector has non-finite values")


def stub_encode(text: str, seed: int) -> np.ndarray:
    """Deterministic 512-dim unit-norm vector from (text, seed).

    FNV-1a hashes the pair into a Philox key; 512 standard normals are drawn
    and normalized in float64 before the float32 cast. Identical texts give
    identical vectors; unrelated texts give near-orthogonal ones.
    """
    rng = philox("stub-encoder", seed, text)
    v = rng.standard_normal(EMBED_DIM)
    v /= np.linalg.norm(v)
    return v.astype(np.float32)


def scale_to_pixels(v: np.ndarray) -> np.ndarray:
    """Affine map [-1, 1] -> [0, 255] per component, clamped outside.

    Fixed (not per-sample min-max) so the same embedding value always lands on
    the same pixel value in train and test.
    """
    arr = np.asarray(v, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise DataError("cannot scale non-finite embedding values")
    return np.clip((arr + 1.0) / 2.0 * 255.0, 0.0, 255.0)


class StubEncoder:
    """Batch interface over `stub_encode`, keyed by chunk text."""

    dim = EMBED_DIM

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.name = f"stub(seed={seed})"

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        return np.stack([stub_encode(t, self.seed) for t in texts]) if texts else np.zeros((0, EMBED_DIM), np.float32)

    def encode_chunks(self, chunks: list[Chunk]) -> list[EmbeddingRecord]:
        return [
            EmbeddingRecord(chunk_id=c.id, label=c.label, vector=stub_encode(c.text, self.seed))
            for c in chunks
        ]


class FileEmbeddingSource:
    """Serves pre-computed vectors from a ZZEB file, keyed by chunk id."""

    dim = EMBED_DIM

    def __init__(self, path: str | Path):
        self.path = str(path)
        self.name = f"file:{self.path}"
        self._by_id = {r.chunk_id: r for r in read_embeddings(path)}

    def encode_chunks(self, chunks: list[Chunk]) -> list[EmbeddingRecord]:
        records = []
        for c in chunks:
            rec = self._by_id.get(c.id)
            if rec is None:
                raise DataError(f"{self.path}: no embedding for chunk id {c.id!r}")
            records.append(EmbeddingRecord(chunk_id=c.id, label=c.label, vector=rec.vector))
        return records


def write_embeddings(records: list[EmbeddingRecord], path: str | Path) -> None:
    """Write records in the ZZEB binary format (bit-exact float32 payload).

    Layout: magic "ZZEB", uint16 LE version, uint64 LE record count,
    uint32 LE dimension (512); then per record: uint16 LE id length +
    UTF-8 id, one label byte (0 human / 1 ai / 255 unlabeled), 512 float32 LE.
    """
    with open(path, "wb") as fh:
        fh.write(ZZEB_MAGIC)
        fh.write(struct.pack("<HQI", ZZEB_VERSION, len(records), EMBED_DIM))
        for rec in records:
            ident = rec.chunk_id.encode("utf-8")
            if len(ident) > 0xFFFF:
                raise DataError(f"chunk id too long to serialize: {rec.chunk_id[:40]!r}...")
            fh.write(struct.pack("<H", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<B", _LABEL_TO_BYTE[rec.label]))
            fh.write(np.ascontiguousarray(rec.vector, dtype="<f4").tobytes())


def read_embeddings(path: str | Path) -> list[EmbeddingRecord]:
    """Read a ZZEB file back into records; inverse of `write_embeddings`."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != ZZEB_MAGIC:
        raise BadMagicError(f"{path}: not a ZZEB embedding file")
    if len(data) < 18:
        raise TruncatedFileError(f"{path}: header truncated")
    version, count, dim = struct.unpack_from("<HQI", data, 4)
    if version != ZZEB_VERSION:
        raise BadVersionError(f"{path}: unsupported ZZEB version {version}")
    if dim != EMBED_DIM:
        raise DimensionError(f"{path}: dimension {dim}, expected {EMBED_DIM}")
    records: list[EmbeddingRecord] = []
    off = 18
    vec_bytes = EMBED_DIM * 4
    for _ in range(count):
        if off + 2 > len(data):
            raise TruncatedFileError(f"{path}: truncated at record {len(records)}")
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        if off + id_len + 1 + vec_bytes > len(data):
            raise TruncatedFileError(f"{path}: truncated at record {len(records)}")
        chunk_id = data[off : off + id_len].decode("utf-8")
        off += id_len
        label_byte = data[off]
        off += 1
        if label_byte not in _BYTE_TO_LABEL:
            raise FileFormatError(f"{path}: bad label byte {label_byte} in record {len(records)}")
        vector = np.frombuffer(data, dtype="<f4", count=EMBED_DIM, offset=off).copy()
        off += vec_bytes
        records.append(
            EmbeddingRecord(chunk_id=chunk_id, label=_BYTE_TO_LABEL[label_byte], vector=vector)
        )
    if off != len(data):
        raise FileFormatError(f"{path}: {len(data) - off} trailing bytes after last record")
    return records
