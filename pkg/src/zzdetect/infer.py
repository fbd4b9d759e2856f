"""End-to-end document scoring and the 3-phase inference latency benchmark.

Scoring: split the text into 3-sentence chunks, encode, scale to pixels, run
the net, sigmoid each chunk's logit gap, and average into one AI probability.
The benchmark wall-clocks preprocessing (split + encode + scale), forward
pass, and output processing (sigmoid + averaging) separately.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from statistics import median

import numpy as np
import torch

from .data import make_chunks, split_sentences
from .embedding import scale_to_pixels
from .errors import DataError
from .model import ZigZagNet
from .prng import philox


def ai_probability(logits) -> np.ndarray | float:
    """Probability the chunk is AI: sigmoid(logit_ai - logit_human).

    Identical to the 2-class softmax AI probability, so the "sigmoid on the
    model output" inference rule and the cross-entropy training objective
    agree. Accepts a (2,) pair or an (N, 2) array; never overflows.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if arr.shape[-1] != 2:
        raise ValueError(f"expected logit pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("logits must be finite")
    z = arr[..., 1] - arr[..., 0]
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


@dataclass
class DetectionResult:
    overall_ai_probability: float
    per_chunk: list[tuple[str, float]]
    chunk_count: int

    def to_json_dict(self) -> dict:
        return {
            "overall_ai_probability": self.overall_ai_probability,
            "chunk_count": self.chunk_count,
            "per_chunk": [
                {"chunk_id": cid, "ai_probability": p} for cid, p in self.per_chunk
            ],
        }


def _forward_batched(net: ZigZagNet, pixels: np.ndarray, batch_size: int) -> np.ndarray:
    net.eval()
    outs = []
    with torch.no_grad():
        for start in range(0, len(pixels), batch_size):
            xb = torch.from_numpy(pixels[start : start + batch_size])
            outs.append(net(xb).numpy())
    return np.concatenate(outs, axis=0)


def detect(text: str, net: ZigZagNet, encoder, batch_size: int = 128) -> DetectionResult:
    """Score a document; the overall probability is the mean over its chunks."""
    sentences = split_sentences(text)
    if not sentences:
        raise DataError("no sentences could be extracted from the input text")
    chunks = make_chunks(sentences, "infer", id_prefix="chunk", source_model="human")
    records = encoder.encode_chunks(chunks)
    pixels = scale_to_pixels(np.stack([r.vector for r in records]))
    logits = _forward_batched(net, pixels, batch_size)
    probs = ai_probability(logits)
    per_chunk = [(c.id, float(p)) for c, p in zip(chunks, probs)]
    return DetectionResult(
        overall_ai_probability=float(np.mean(probs)),
        per_chunk=per_chunk,
        chunk_count=len(chunks),
    )


# ---------------------------------------------------------------------------
# Benchmark

_BENCH_VOCAB = (
    "the quick brown fox jumps over a lazy dog while many small birds watch "
    "from tall green trees near still water and old stone walls under bright "
    "skies that slowly turn dark before light rain falls again across wide "
    "open fields"
).split()


def generate_sentences(count: int, seed: int = 0) -> list[str]:
    """Deterministic synthetic sentences (8-20 words, fixed vocabulary)."""
    rng = philox("bench-text", seed)
    sentences = []
    for _ in range(count):
        length = int(rng.integers(8, 21))
        words = [_BENCH_VOCAB[int(i)] for i in rng.integers(0, len(_BENCH_VOCAB), length)]
        words[0] = words[0].capitalize()
        sentences.append(" ".join(words) + ".")
    return sentences


@dataclass
class BenchRow:
    num_sentences: int
    batch_size: int
    preprocessing_ms: float
    forward_ms: float
    output_ms: float
    total_ms: float
    ms_per_sentence: float


@dataclass
class BenchReport:
    rows: list[BenchRow]
    encoder: str
    repetitions: int
    warnings: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [
            "num_sentences,batch_size,preprocessing_ms,forward_ms,output_ms,total_ms,ms_per_sentence"
        ]
        for r in self.rows:
            lines.append(
                f"{r.num_sentences},{r.batch_size},{r.preprocessing_ms:.3f},"
                f"{r.forward_ms:.3f},{r.output_ms:.3f},{r.total_ms:.3f},{r.ms_per_sentence:.4f}"
            )
        return "\n".join(lines) + "\n"

    def row(self, num_sentences: int, batch_size: int) -> BenchRow:
        for r in self.rows:
            if r.num_sentences == num_sentences and r.batch_size == batch_size:
                return r
        raise KeyError(f"no benchmark cell ({num_sentences}, {batch_size})")


def _one_pass(net: ZigZagNet, encoder, text: str, batch_size: int):
    t0 = time.perf_counter()
    sentences = split_sentences(text)
    chunks = make_chunks(sentences, "infer", id_prefix="bench", source_model="human")
    records = encoder.encode_chunks(chunks)
    pixels = scale_to_pixels(np.stack([r.vector for r in records]))
    t1 = time.perf_counter()
    logits = _forward_batched(net, pixels, batch_size)
    t2 = time.perf_counter()
    probs = ai_probability(logits)
    overall = float(np.mean(probs))
    t3 = time.perf_counter()
    return (t1 - t0, t2 - t1, t3 - t2, t3 - t0, overall)


def benchmark(
    net: ZigZagNet,
    encoder,
    sentence_counts: tuple[int, ...] = (10, 100, 1000, 10000),
    batch_sizes: tuple[int, ...] = (1, 32, 128),
    repetitions: int = 5,
    seed: int = 0,
) -> BenchReport:
    """Median phase timings per (sentence count, batch size) cell.

    Each cell gets one untimed warm-up run, then `repetitions` timed runs.
    Total is measured end to end, so it can exceed the phase sum by clock
    overhead (sub-millisecond); phase attribution is only meaningful because
    phases run serially.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    all_sentences = generate_sentences(max(sentence_counts), seed)
    rows = []
    for count in sentence_counts:
        text = " ".join(all_sentences[:count])
        for batch_size in batch_sizes:
            _one_pass(net, encoder, text, batch_size)  # warm-up
            samples = [_one_pass(net, encoder, text, batch_size) for _ in range(repetitions)]
            pre = median(s[0] for s in samples) * 1000
            fwd = median(s[1] for s in samples) * 1000
            out = median(s[2] for s in samples) * 1000
            total = median(s[3] for s in samples) * 1000
            rows.append(
                BenchRow(
                    num_sentences=count,
                    batch_size=batch_size,
                    preprocessing_ms=pre,
                    forward_ms=fwd,
                    output_ms=out,
                    total_ms=total,
                    ms_per_sentence=total / count,
                )
            )
    report = BenchReport(rows=rows, encoder=getattr(encoder, "name", "unknown"), repetitions=repetitions)
    for count in sentence_counts:
        cells = sorted(
            (r for r in report.rows if r.num_sentences == count), key=lambda r: r.batch_size
        )
        for a, b in zip(cells, cells[1:]):
            if b.forward_ms > a.forward_ms * 1.05:
                report.warnings.append(
                    f"forward time rose with batch size at {count} sentences: "
                    f"{a.batch_size}->{b.batch_size} took {a.forward_ms:.2f}->{b.forward_ms:.2f} ms"
                )
    return report
