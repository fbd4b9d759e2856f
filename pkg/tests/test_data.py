import json

import pytest
from hypothesis import given, strategies as st

from zzdetect.data import (
    Chunk,
    TextSample,
    build_balanced,
    chunk_sample,
    make_chunks,
    read_chunk_file,
    read_corpus,
    split_dataset,
    split_sentences,
    write_chunk_file,
)
from zzdetect.errors import DataError


def _chunks(n, label="ai", source="chatgpt", prefix="c"):
    return [
        Chunk(id=f"{prefix}{i}", sentences=("One sentence.",), label=label, source_model=source)
        for i in range(n)
    ]


class TestSplitSentences:
    def test_basic_terminators(self):
        assert split_sentences("A cat sat. It slept! Why?") == ["A cat sat.", "It slept!", "Why?"]

    def test_empty(self):
        assert split_sentences("") == []
        assert split_sentences("   \n  ") == []

    def test_abbreviation_exceptions(self):
        assert split_sentences("Dr. Smith left. He returned.") == ["Dr. Smith left.", "He returned."]
        assert split_sentences("See Fig. 3 for details. Then stop.") == [
            "See Fig. 3 for details.",
            "Then stop.",
        ]
        # e.g. never splits, even mid-sentence
        assert split_sentences("Fruit, e.g. apples, is good. Yes.") == [
            "Fruit, e.g. apples, is good.",
            "Yes.",
        ]

    def test_no_split_without_whitespace(self):
        assert split_sentences("A cat.It slept.") == ["A cat.It slept."]

    def test_no_split_before_lowercase(self):
        assert split_sentences("He said no. but then agreed.") == ["He said no. but then agreed."]

    def test_split_before_digit_and_quote(self):
        assert split_sentences('It works. 42 is proof. "Quote" too.') == [
            "It works.",
            "42 is proof.",
            '"Quote" too.',
        ]

    def test_trailing_fragment_kept(self):
        assert split_sentences("Done. And then") == ["Done.", "And then"]

    @given(st.text(max_size=300))
    def test_join_recovers_input_modulo_whitespace(self, text):
        sentences = split_sentences(text)
        assert " ".join(sentences).split() == text.split()


class TestMakeChunks:
    def test_seven_sentences_train_drops_remainder(self):
        chunks = make_chunks([f"S {i}." for i in range(7)], "train")
        assert len(chunks) == 2
        assert all(len(c.sentences) == 3 for c in chunks)

    def test_seven_sentences_infer_keeps_remainder(self):
        chunks = make_chunks([f"S {i}." for i in range(7)], "infer")
        assert [len(c.sentences) for c in chunks] == [3, 3, 1]

    def test_three_sentences_single_chunk(self):
        for mode in ("train", "infer"):
            assert len(make_chunks(["A.", "B.", "C."], mode)) == 1

    def test_partition_property(self):
        sentences = [f"Sentence {i}." for i in range(11)]
        chunks = make_chunks(sentences, "infer")
        flat = [s for c in chunks for s in c.sentences]
        assert flat == sentences
        train_flat = [s for c in make_chunks(sentences, "train") for s in c.sentences]
        assert train_flat == sentences[:9]

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            make_chunks(["A."], "test")

    def test_ids_carry_prefix(self):
        chunks = make_chunks(["A.", "B.", "C.", "D."], "infer", id_prefix="doc7")
        assert [c.id for c in chunks] == ["doc7#0", "doc7#1"]


class TestBuildBalanced:
    def test_counts(self):
        out = build_balanced(_chunks(100), _chunks(1000, label="human", source="human", prefix="h"), seed=5)
        assert len(out) == 200
        assert sum(1 for c in out if c.label == "ai") == 100
        assert sum(1 for c in out if c.label == "human") == 100

    def test_deterministic(self):
        ai = _chunks(50)
        pool = _chunks(200, label="human", source="human", prefix="h")
        a = build_balanced(ai, pool, seed=9)
        b = build_balanced(ai, pool, seed=9)
        assert [c.id for c in a] == [c.id for c in b]
        c = build_balanced(ai, pool, seed=10)
        assert [x.id for x in a] != [x.id for x in c]

    def test_insufficient_pool(self):
        with pytest.raises(DataError, match="need 100.*have 50"):
            build_balanced(_chunks(100), _chunks(50, label="human", source="human", prefix="h"), seed=0)

    @given(st.integers(1, 60), st.integers(0, 60), st.integers(0, 2**32))
    def test_always_exactly_balanced(self, n_ai, extra, seed):
        ai = _chunks(n_ai)
        pool = _chunks(n_ai + extra, label="human", source="human", prefix="h")
        out = build_balanced(ai, pool, seed)
        assert sum(1 for c in out if c.label == "ai") == n_ai
        assert sum(1 for c in out if c.label == "human") == n_ai
        # sampled without replacement
        human_ids = [c.id for c in out if c.label == "human"]
        assert len(set(human_ids)) == len(human_ids)


class TestSplitDataset:
    def test_sizes(self):
        split = split_dataset(_chunks(100), (0.8, 0.1, 0.1), seed=1)
        assert (len(split.train), len(split.val), len(split.test)) == (80, 10, 10)

    def test_stratified_balance(self):
        chunks = _chunks(50) + _chunks(50, label="human", source="human", prefix="h")
        split = split_dataset(chunks, (0.8, 0.1, 0.1), seed=2)
        for part in (split.train, split.val, split.test):
            ai = sum(1 for c in part if c.label == "ai")
            human = len(part) - ai
            assert abs(ai - human) <= 1

    def test_deterministic_and_disjoint(self):
        chunks = _chunks(30) + _chunks(40, label="human", source="human", prefix="h")
        a = split_dataset(chunks, (0.6, 0.2, 0.2), seed=3)
        b = split_dataset(chunks, (0.6, 0.2, 0.2), seed=3)
        assert [c.id for c in a.train] == [c.id for c in b.train]
        assert [c.id for c in a.test] == [c.id for c in b.test]
        ids = [c.id for part in (a.train, a.val, a.test) for c in part]
        assert len(ids) == len(set(ids)) == 70

    def test_too_few_chunks(self):
        with pytest.raises(DataError):
            split_dataset(_chunks(2), (0.8, 0.1, 0.1), seed=0)

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split_dataset(_chunks(10), (0.8, 0.1, 0.2), seed=0)
        with pytest.raises(ValueError):
            split_dataset(_chunks(10), (1.0, -0.1, 0.1), seed=0)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            split_dataset(_chunks(5) + _chunks(5), (0.8, 0.1, 0.1), seed=0)


class TestTypesAndFiles:
    def test_sample_invariants(self):
        with pytest.raises(DataError, match="empty"):
            TextSample(id="a", text="  ", label="ai", source_model="chatgpt", dataset_id="d")
        with pytest.raises(DataError, match="label"):
            TextSample(id="a", text="x", label="robot", source_model="chatgpt", dataset_id="d")
        with pytest.raises(DataError, match="source_model=human"):
            TextSample(id="a", text="x", label="human", source_model="chatgpt", dataset_id="d")

    def test_chunk_invariants(self):
        with pytest.raises(DataError):
            Chunk(id="c", sentences=(), label="ai", source_model="chatgpt")
        with pytest.raises(DataError):
            Chunk(id="c", sentences=("A.", "B.", "C.", "D."), label="ai", source_model="chatgpt")
        with pytest.raises(DataError):
            Chunk(id="c", sentences=("A.", " "), label="ai", source_model="chatgpt")

    def test_chunk_sample_carries_metadata(self):
        sample = TextSample(
            id="s1",
            text="One sentence here. Two now follow. Three to finish. Leftover bit.",
            label="ai",
            source_model="llama",
            dataset_id="d",
        )
        chunks = chunk_sample(sample, mode="train")
        assert len(chunks) == 1
        assert chunks[0].id == "s1#0"
        assert chunks[0].label == "ai"
        assert chunks[0].source_model == "llama"

    def test_chunk_file_roundtrip(self, tmp_path):
        chunks = [
            Chunk(id="a#0", sentences=("First one.", "Second one.", "Third one."), label="ai", source_model="gpt4"),
            Chunk(id="b#0", sentences=("Only one.",), label=None, source_model="human"),
        ]
        path = tmp_path / "chunks.jsonl"
        write_chunk_file(chunks, path)
        back = read_chunk_file(path)
        assert [c.id for c in back] == ["a#0", "b#0"]
        assert back[0].text == "First one. Second one. Third one."
        assert back[0].label == "ai"
        assert back[1].label is None

    def test_read_corpus_error_budget(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        lines = [
            json.dumps({"id": "1", "text": "Hello there. It works. Good.", "label": "ai", "source_model": "claude", "dataset_id": "d"}),
            "{ not json",
            json.dumps({"id": "2", "text": "x", "label": "bad", "source_model": "claude", "dataset_id": "d"}),
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(DataError, match="line"):
            read_corpus(path, max_errors=0)
        samples, errors = read_corpus(path, max_errors=2)
        assert len(samples) == 1
        assert len(errors) == 2
        assert all(":2:" in e or ":3:" in e for e in errors)

    def test_unknown_fields_ignored(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text(
            json.dumps(
                {"id": "1", "text": "Ok then. Fine now. Done here.", "label": "human",
                 "source_model": "human", "dataset_id": "d", "extra_field": 42}
            )
            + "\n",
            encoding="utf-8",
        )
        samples, _ = read_corpus(path)
        assert len(samples) == 1
