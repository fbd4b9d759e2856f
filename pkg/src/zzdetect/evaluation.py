"""Detection-rate metric, cross-domain evaluation matrix, ensemble scoring,
and the 4-way architecture x scheduler ablation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import LABEL_AI
from .embedding import EmbeddingRecord, scale_to_pixels
from .errors import DataError
from .infer import _forward_batched, ai_probability
from .model import ZigZagConfig, ZigZagNet, vanilla_config
from .optim import SchedulerConfig
from .train import EmbeddedSplit, TrainConfig, fit


def detection_rate(net: ZigZagNet, records: list[EmbeddingRecord]) -> float:
    """Percentage of pure-AI records predicted AI (argmax, ties -> human)."""
    if not records:
        raise DataError("empty test set")
    for r in records:
        if r.label != LABEL_AI:
            raise DataError(
                f"record {r.chunk_id!r} has label {r.label!r}; detection rate is "
                "defined on pure-AI test sets"
            )
    pixels = scale_to_pixels(np.stack([r.vector for r in records]))
    logits = _forward_batched(net, pixels, batch_size=256)
    predicted_ai = logits[:, 1] > logits[:, 0]
    return 100.0 * float(np.mean(predicted_ai))


def _render_matrix(row_labels, cols, cells, averages, extra=None) -> str:
    """Aligned plain-text table; `extra` maps row label -> trailing column."""
    header = ["train/test", *cols, "average"] + (["best_val_acc"] if extra else [])
    table = [header]
    for label in row_labels:
        row = [label] + [f"{cells[(label, c)]:.2f}" for c in cols] + [f"{averages[label]:.2f}"]
        if extra:
            row.append(f"{extra[label]:.4f}")
        table.append(row)
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table) + "\n"


def _render_csv(row_labels, cols, cells, averages) -> str:
    lines = ["train_source," + ",".join(cols) + ",average"]
    for label in row_labels:
        cells_txt = ",".join(f"{cells[(label, c)]:.2f}" for c in cols)
        lines.append(f"{label},{cells_txt},{averages[label]:.2f}")
    return "\n".join(lines) + "\n"


@dataclass
class EvalReport:
    rows: list[str]
    cols: list[str]
    rates: dict[tuple[str, str], float]
    averages: dict[str, float]

    def rate(self, train_source: str, test_source: str) -> float:
        return self.rates[(train_source, test_source)]

    def to_csv(self) -> str:
        return _render_csv(self.rows, self.cols, self.rates, self.averages)

    def to_text(self) -> str:
        return _render_matrix(self.rows, self.cols, self.rates, self.averages)


def cross_matrix(
    models: dict[str, ZigZagNet], testsets: dict[str, list[EmbeddingRecord]]
) -> EvalReport:
    """Detection rate for every (train source, test source) pair.

    Diagonal entries are intra-domain, off-diagonal inter-domain; each row
    ends with its arithmetic mean. Cell values depend only on (model, set),
    never on mapping insertion order.
    """
    if not models or not testsets:
        raise DataError("need at least one model and one test set")
    for name, records in testsets.items():
        if not records:
            raise DataError(f"test set {name!r} has no embedding records")
    rates = {}
    averages = {}
    for mname, net in models.items():
        for tname, records in testsets.items():
            rates[(mname, tname)] = detection_rate(net, records)
        averages[mname] = float(np.mean([rates[(mname, t)] for t in testsets]))
    return EvalReport(rows=list(models), cols=list(testsets), rates=rates, averages=averages)


def ensemble_rate(models: list[ZigZagNet], records: list[EmbeddingRecord]) -> float:
    """Detection rate of the mean-probability ensemble (threshold 0.5)."""
    if not models:
        raise DataError("ensemble needs at least one model")
    if not records:
        raise DataError("empty test set")
    for r in records:
        if r.label != LABEL_AI:
            raise DataError(f"record {r.chunk_id!r} is not AI-labeled")
    pixels = scale_to_pixels(np.stack([r.vector for r in records]))
    probs = np.stack(
        [ai_probability(_forward_batched(net, pixels, batch_size=256)) for net in models]
    )
    mean_probs = probs.mean(axis=0)
    return 100.0 * float(np.mean(mean_probs > 0.5))


ABLATION_ROWS = (
    ("vanilla", "none"),
    ("vanilla", "zigzag"),
    ("zigzag", "none"),
    ("zigzag", "zigzag"),
)


@dataclass
class AblationRow:
    arch: str
    scheduler: str
    rates: dict[str, float]
    average: float
    best_val_acc: float

    @property
    def label(self) -> str:
        return f"{self.arch}+{self.scheduler}"


@dataclass
class AblationReport:
    rows: list[AblationRow]
    cols: list[str]

    def row(self, arch: str, scheduler: str) -> AblationRow:
        for r in self.rows:
            if r.arch == arch and r.scheduler == scheduler:
                return r
        raise KeyError(f"no ablation row ({arch}, {scheduler})")

    def to_csv(self) -> str:
        cells = {(r.label, c): r.rates[c] for r in self.rows for c in self.cols}
        averages = {r.label: r.average for r in self.rows}
        return _render_csv([r.label for r in self.rows], self.cols, cells, averages)

    def to_text(self) -> str:
        cells = {(r.label, c): r.rates[c] for r in self.rows for c in self.cols}
        averages = {r.label: r.average for r in self.rows}
        extra = {r.label: r.best_val_acc for r in self.rows}
        return _render_matrix([r.label for r in self.rows], self.cols, cells, averages, extra)


def run_ablation(
    split: EmbeddedSplit,
    testsets: dict[str, list[EmbeddingRecord]],
    base_config: TrainConfig,
) -> AblationReport:
    """Train the four architecture x scheduler combinations on identical data
    and seed ("none" = constant lr) and tabulate cross-set detection rates.

    Rows sharing an architecture start from bit-identical initial parameters
    because initialization depends only on (architecture config, seed).
    """
    if not testsets:
        raise DataError("ablation needs at least one test set")
    zigzag_cfg = base_config.model if base_config.model.arch == "zigzag" else ZigZagConfig()
    sched_cfg = base_config.scheduler if base_config.scheduler is not None else SchedulerConfig()
    rows = []
    for arch, sched in ABLATION_ROWS:
        cfg = replace(
            base_config,
            model=zigzag_cfg if arch == "zigzag" else vanilla_config(),
            scheduler=sched_cfg if sched == "zigzag" else None,
        )
        net, history = fit(split, cfg)
        rates = {name: detection_rate(net, records) for name, records in testsets.items()}
        rows.append(
            AblationRow(
                arch=arch,
                scheduler=sched,
                rates=rates,
                average=float(np.mean(list(rates.values()))),
                best_val_acc=max(rec.val_acc for rec in history),
            )
        )
    return AblationReport(rows=rows, cols=list(testsets))
