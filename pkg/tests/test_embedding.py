import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zzdetect.data import Chunk
from zzdetect.embedding import (
    EMBED_DIM,
    EmbeddingRecord,
    FileEmbeddingSource,
    StubEncoder,
    ZZEB_MAGIC,
    read_embeddings,
    scale_to_pixels,
    stub_encode,
    write_embeddings,
)
from zzdetect.errors import (
    BadMagicError,
    BadVersionError,
    DataError,
    DimensionError,
    FileFormatError,
    TruncatedFileError,
)
from zzdetect.prng import philox


class TestStubEncode:
    def test_deterministic(self):
        a = stub_encode("some text", 7)
        b = stub_encode("some text", 7)
        assert np.array_equal(a, b)

    def test_depends_on_text_and_seed(self):
        base = stub_encode("some text", 7)
        assert not np.array_equal(base, stub_encode("some text!", 7))
        assert not np.array_equal(base, stub_encode("some text", 8))

    def test_unit_norm(self):
        for text in ("", "a", "lorem ipsum dolor", "日本語のテキスト"):
            v = stub_encode(text, 0)
            assert v.shape == (EMBED_DIM,)
            assert abs(float(np.linalg.norm(v.astype(np.float64))) - 1.0) < 1e-6

    def test_decorrelation_of_near_duplicate_texts(self):
        # hash decorrelation oracle: 1000 pairs differing by one character
        rng = philox("decorrelation-test")
        worst = 0.0
        for i in range(1000):
            length = int(rng.integers(5, 60))
            chars = [chr(97 + int(c)) for c in rng.integers(0, 26, length)]
            text = "".join(chars)
            pos = int(rng.integers(0, length))
            flipped = chars.copy()
            flipped[pos] = chr(97 + (ord(flipped[pos]) - 97 + 1) % 26)
            other = "".join(flipped)
            cos = float(np.dot(stub_encode(text, 3), stub_encode(other, 3)))
            worst = max(worst, abs(cos))
        assert worst < 0.5

    def test_components_within_unit_interval(self):
        # unit-norm vectors always scale without clamping
        for i in range(50):
            v = stub_encode(f"text {i}", 1)
            assert np.all(v >= -1.0) and np.all(v <= 1.0)


class TestScaleToPixels:
    def test_endpoints_and_midpoint(self):
        v = np.zeros(EMBED_DIM, dtype=np.float32)
        v[0], v[1] = -1.0, 1.0
        out = scale_to_pixels(v)
        assert out[0] == 0.0
        assert out[1] == 255.0
        assert out[2] == 127.5

    def test_all_zero_vector(self):
        out = scale_to_pixels(np.zeros(EMBED_DIM, dtype=np.float32))
        assert np.all(out == 127.5)

    def test_clamps_out_of_range(self):
        v = np.zeros(EMBED_DIM, dtype=np.float32)
        v[0], v[1] = -3.0, 42.0
        out = scale_to_pixels(v)
        assert out[0] == 0.0
        assert out[1] == 255.0

    def test_nonfinite_rejected(self):
        v = np.zeros(EMBED_DIM, dtype=np.float32)
        v[5] = np.nan
        with pytest.raises(DataError):
            scale_to_pixels(v)

    @given(st.lists(st.floats(-1, 1, width=32), min_size=2, max_size=32))
    def test_affine_and_monotone_inside_range(self, values):
        arr = np.array(values, dtype=np.float32)
        out = scale_to_pixels(arr)
        expected = (arr.astype(np.float64) + 1) / 2 * 255
        assert np.allclose(out, expected, atol=1e-4)
        order = np.argsort(arr, kind="stable")
        assert np.all(np.diff(out[order]) >= 0)

    @given(st.lists(st.floats(-50, 50, width=32), min_size=1, max_size=32))
    def test_idempotent_under_clamping(self, values):
        arr = np.array(values, dtype=np.float32)
        once = scale_to_pixels(arr)
        assert np.all(once >= 0.0) and np.all(once <= 255.0)


def _records(n, labels=("human", "ai", None)):
    rng = philox("zzeb-test", n)
    out = []
    for i in range(n):
        vec = rng.standard_normal(EMBED_DIM).astype(np.float32)
        out.append(EmbeddingRecord(chunk_id=f"rec-{i}", label=labels[i % len(labels)], vector=vec))
    return out


class TestZZEBFormat:
    def test_roundtrip_bit_exact(self, tmp_path):
        records = _records(3)
        path = tmp_path / "e.zzeb"
        write_embeddings(records, path)
        back = read_embeddings(path)
        assert len(back) == 3
        for orig, got in zip(records, back):
            assert got.chunk_id == orig.chunk_id
            assert got.label == orig.label
            assert got.vector.tobytes() == orig.vector.tobytes()

    def test_rewrite_is_byte_identical(self, tmp_path):
        records = _records(5)
        p1, p2 = tmp_path / "a.zzeb", tmp_path / "b.zzeb"
        write_embeddings(records, p1)
        write_embeddings(read_embeddings(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.zzeb"
        write_embeddings([], path)
        assert read_embeddings(path) == []

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.zzeb"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(BadMagicError):
            read_embeddings(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "v9.zzeb"
        path.write_bytes(ZZEB_MAGIC + struct.pack("<HQI", 9, 0, EMBED_DIM))
        with pytest.raises(BadVersionError):
            read_embeddings(path)

    def test_wrong_dimension(self, tmp_path):
        path = tmp_path / "d256.zzeb"
        path.write_bytes(ZZEB_MAGIC + struct.pack("<HQI", 1, 0, 256))
        with pytest.raises(DimensionError):
            read_embeddings(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "t.zzeb"
        write_embeddings(_records(2), path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 100])
        with pytest.raises(TruncatedFileError):
            read_embeddings(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "x.zzeb"
        write_embeddings(_records(1), path)
        path.write_bytes(path.read_bytes() + b"junk")
        with pytest.raises(FileFormatError):
            read_embeddings(path)

    def test_exact_header_layout(self, tmp_path):
        path = tmp_path / "h.zzeb"
        write_embeddings(_records(1, labels=("ai",)), path)
        data = path.read_bytes()
        assert data[:4] == b"ZZEB"
        version, count, dim = struct.unpack_from("<HQI", data, 4)
        assert (version, count, dim) == (1, 1, 512)
        (id_len,) = struct.unpack_from("<H", data, 18)
        assert data[20 : 20 + id_len] == b"rec-0"
        assert data[20 + id_len] == 1  # ai label byte

    def test_record_validation(self):
        with pytest.raises(DataError):
            EmbeddingRecord(chunk_id="", label="ai", vector=np.zeros(EMBED_DIM, np.float32))
        with pytest.raises(DataError):
            EmbeddingRecord(chunk_id="x", label="ai", vector=np.zeros(100, np.float32))
        bad = np.zeros(EMBED_DIM, np.float32)
        bad[0] = np.inf
        with pytest.raises(DataError):
            EmbeddingRecord(chunk_id="x", label="ai", vector=bad)


class TestEncoders:
    def test_stub_encoder_matches_function(self):
        chunks = [Chunk(id="c1", sentences=("Hello there.", "Bye now."), label="ai", source_model="gpt4")]
        recs = StubEncoder(seed=4).encode_chunks(chunks)
        assert recs[0].chunk_id == "c1"
        assert recs[0].label == "ai"
        assert np.array_equal(recs[0].vector, stub_encode("Hello there. Bye now.", 4))

    def test_file_source_lookup(self, tmp_path):
        records = _records(3)
        path = tmp_path / "f.zzeb"
        write_embeddings(records, path)
        source = FileEmbeddingSource(path)
        chunks = [Chunk(id="rec-1", sentences=("Whatever text.",), label="human", source_model="human")]
        out = source.encode_chunks(chunks)
        assert np.array_equal(out[0].vector, records[1].vector)
        missing = [Chunk(id="nope", sentences=("X.",), label=None, source_model="human")]
        with pytest.raises(DataError, match="nope"):
            source.encode_chunks(missing)
