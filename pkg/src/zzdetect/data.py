"""Corpus ingestion, sentence splitting, 3-sentence chunking, and dataset assembly.

Operations here are pure given (inputs, seed); every random draw goes through
the Philox generators in :mod:`zzdetect.prng`, so outputs are bit-reproducible
across runs and platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError
from .prng import fnv1a64, philox

LABEL_HUMAN = "human"
LABEL_AI = "ai"
LABELS = (LABEL_HUMAN, LABEL_AI)

SOURCE_MODELS = ("mistral", "claude", "llama", "chatgpt", "gpt4", "falcon", "human")

_TERMINATORS = ".!?"
_QUOTE_CHARS = "\"'“‘"
_LEADING_PUNCT = "\"'“‘(["

# Fixed exception list: a '.' ending one of these tokens never splits, even
# where the abbreviation legitimately ends a sentence.
ABBREVIATIONS = frozenset(
    {"Dr.", "Mr.", "Mrs.", "Ms.", "e.g.", "i.e.", "etc.", "vs.", "Fig.", "Eq.", "U.S."}
)


@dataclass(frozen=True)
class TextSample:
    """One labeled document from a corpus file."""

    id: str
    text: str
    label: str
    source_model: str
    dataset_id: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise DataError(f"sample {self.id!r}: text is empty")
        if self.label not in LABELS:
            raise DataError(f"sample {self.id!r}: label must be one of {LABELS}, got {self.label!r}")
        if self.source_model not in SOURCE_MODELS:
            raise DataError(
                f"sample {self.id!r}: source_model must be one of {SOURCE_MODELS}, "
                f"got {self.source_model!r}"
            )
        if self.label == LABEL_HUMAN and self.source_model != "human":
            raise DataError(
                f"sample {self.id!r}: label=human requires source_model=human, "
                f"got {self.source_model!r}"
            )


@dataclass(frozen=True)
class Chunk:
    """1-3 consecutive sentences; the atomic classification unit."""

    id: str
    sentences: tuple[str, ...]
    label: str | None
    source_model: str

    def __post_init__(self) -> None:
        if not 1 <= len(self.sentences) <= 3:
            raise DataError(f"chunk {self.id!r}: needs 1-3 sentences, got {len(self.sentences)}")
        if any(not s.strip() for s in self.sentences):
            raise DataError(f"chunk {self.id!r}: contains an empty sentence")
        if self.label is not None and self.label not in LABELS:
            raise DataError(f"chunk {self.id!r}: bad label {self.label!r}")

    @property
    def text(self) -> str:
        """Canonical chunk text: sentences joined by a single space."""
        return " ".join(self.sentences)


@dataclass
class DatasetSplit:
    train: list[Chunk]
    val: list[Chunk]
    test: list[Chunk]
    seed: int


def split_sentences(text: str) -> list[str]:
    """Split text into sentences.

    A sentence boundary is a '.', '!' or '?' followed by whitespace and then an
    uppercase letter, digit, or opening quote — unless the terminator ends a
    token on the abbreviation exception list. Trailing text without a
    terminator is kept as a final sentence, so the concatenation of the result
    always recovers the input up to inter-sentence whitespace.
    """
    sentences: list[str] = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        ch = text[i]
        if ch in _TERMINATORS and i + 1 < n and text[i + 1].isspace():
            m = i + 1
            while m < n and text[m].isspace():
                m += 1
            nxt = text[m] if m < n else ""
            boundary = bool(nxt) and (nxt.isupper() or nxt.isdigit() or nxt in _QUOTE_CHARS)
            if boundary and ch == "." and _ends_with_abbreviation(text, start, i):
                boundary = False
            if boundary:
                piece = text[start : i + 1].strip()
                if piece:
                    sentences.append(piece)
                start = m
                i = m
                continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _ends_with_abbreviation(text: str, start: int, dot: int) -> bool:
    j = dot
    while j > start and not text[j - 1].isspace():
        j -= 1
    token = text[j : dot + 1].lstrip(_LEADING_PUNCT)
    return token in ABBREVIATIONS


def make_chunks(
    sentences: list[str],
    mode: str,
    *,
    id_prefix: str = "chunk",
    label: str | None = None,
    source_model: str = "human",
) -> list[Chunk]:
    """Group consecutive sentences into non-overlapping chunks of 3.

    mode="train" drops a trailing group of fewer than 3 sentences (uniform
    input size); mode="infer" keeps it as a short chunk so no text is ignored.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    chunks = []
    for k, pos in enumerate(range(0, len(sentences), 3)):
        group = tuple(sentences[pos : pos + 3])
        if len(group) < 3 and mode == "train":
            break
        chunks.append(
            Chunk(id=f"{id_prefix}#{k}", sentences=group, label=label, source_model=source_model)
        )
    return chunks


def chunk_sample(sample: TextSample, mode: str = "train") -> list[Chunk]:
    """Split a corpus sample into chunks carrying its label and source."""
    return make_chunks(
        split_sentences(sample.text),
        mode,
        id_prefix=sample.id,
        label=sample.label,
        source_model=sample.source_model,
    )


def build_balanced(ai: list[Chunk], human_pool: list[Chunk], seed: int) -> list[Chunk]:
    """Pair every AI chunk with one uniformly sampled human chunk (no replacement).

    Returns the AI chunks plus the sampled human chunks, shuffled
    deterministically by seed. Class counts in the result are exactly equal.
    """
    need, have = len(ai), len(human_pool)
    if have < need:
        raise DataError(f"human pool too small: need {need} chunks, have {have}")
    rng = philox("build-balanced", seed)
    picked = rng.permutation(have)[:need]
    combined = list(ai) + [human_pool[i] for i in picked]
    order = rng.permutation(len(combined))
    return [combined[i] for i in order]


def split_dataset(chunks: list[Chunk], ratios: tuple[float, float, float], seed: int) -> DatasetSplit:
    """Seeded, label-stratified partition into train/val/test.

    Ratios must be positive and sum to 1 (within 1e-9). Within each label
    stratum the chunks are shuffled and cut contiguously at the rounded
    cumulative ratios, so class balance is preserved within +/-1 chunk per split.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be 3 positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got sum {sum(ratios)!r}")
    if len(chunks) < 3:
        raise DataError(f"need at least 3 chunks to split, got {len(chunks)}")
    ids = [c.id for c in chunks]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate chunk ids in input")

    strata: dict[str | None, list[Chunk]] = {}
    for c in chunks:
        strata.setdefault(c.label, []).append(c)

    parts: tuple[list[Chunk], list[Chunk], list[Chunk]] = ([], [], [])
    for label in sorted(strata, key=str):
        group = strata[label]
        order = philox("split-dataset", seed, str(label)).permutation(len(group))
        shuffled = [group[i] for i in order]
        n = len(shuffled)
        b1 = int(ratios[0] * n + 0.5)
        b2 = int((ratios[0] + ratios[1]) * n + 0.5)
        parts[0].extend(shuffled[:b1])
        parts[1].extend(shuffled[b1:b2])
        parts[2].extend(shuffled[b2:])

    out = []
    for name, part in zip(("train", "val", "test"), parts):
        order = philox("split-dataset-shuffle", seed, name).permutation(len(part))
        out.append([part[i] for i in order])
    return DatasetSplit(train=out[0], val=out[1], test=out[2], seed=seed)


def epoch_seed(seed: int, epoch: int) -> int:
    """Per-epoch seed so shuffles are reproducible independent of resume point."""
    return fnv1a64("epoch", seed, epoch)


# ---------------------------------------------------------------------------
# Corpus / chunk files: UTF-8, one JSON object per line, unknown fields ignored.

def read_corpus(path: str | Path, max_errors: int = 0) -> tuple[list[TextSample], list[str]]:
    """Read a corpus JSONL file.

    Malformed lines are reported with their line numbers; more than
    `max_errors` of them fails the whole read.
    """
    samples: list[TextSample] = []
    errors: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                samples.append(
                    TextSample(
                        id=str(obj["id"]),
                        text=str(obj["text"]),
                        label=str(obj["label"]),
                        source_model=str(obj["source_model"]),
                        dataset_id=str(obj.get("dataset_id", "")),
                    )
                )
            except (json.JSONDecodeError, KeyError, DataError, TypeError) as exc:
                errors.append(f"{path}:{lineno}: {exc}")
    if len(errors) > max_errors:
        detail = "\n".join(errors[: max_errors + 5])
        raise DataError(
            f"{len(errors)} malformed corpus lines (budget {max_errors}):\n{detail}"
        )
    return samples, errors


def write_chunk_file(chunks: list[Chunk], path: str | Path) -> None:
    """Write chunks as JSONL: {id, text, label, source_model} per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for c in chunks:
            fh.write(
                json.dumps(
                    {"id": c.id, "text": c.text, "label": c.label, "source_model": c.source_model},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_chunk_file(path: str | Path) -> list[Chunk]:
    """Read a chunk JSONL file written by `write_chunk_file` (or the exporter's input).

    Sentence boundaries are not stored in chunk files; each chunk comes back
    with its canonical joined text as a single sentence.
    """
    chunks: list[Chunk] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                chunks.append(
                    Chunk(
                        id=str(obj["id"]),
                        sentences=(str(obj["text"]),),
                        label=obj.get("label"),
                        source_model=str(obj.get("source_model", "human")),
                    )
                )
            except (json.JSONDecodeError, KeyError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: bad chunk line: {exc}") from exc
    return chunks
