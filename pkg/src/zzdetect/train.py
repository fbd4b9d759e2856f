"""Training loop binding data, model, optimizer, and scheduler."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import LABEL_AI, LABEL_HUMAN, epoch_seed
from .embedding import EmbeddingRecord, scale_to_pixels
from .errors import DataError, NumericsError
from .model import BN_MOMENTUM, ZigZagConfig, ZigZagNet, _run, build, clone_net, save_checkpoint
from .optim import (
    SGDConfig,
    SchedulerConfig,
    cross_entropy,
    initial_scheduler_state,
    scheduler_state_to_dict,
    scheduler_step,
    sgd_step,
)
from .prng import fnv1a64, philox


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    seed: int = 0
    batch_size: int = 32
    sgd: SGDConfig = field(default_factory=SGDConfig)
    scheduler: SchedulerConfig | None = field(default_factory=SchedulerConfig)
    model: ZigZagConfig = field(default_factory=ZigZagConfig)
    early_stop_patience: int | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1 when set")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class EmbeddedSplit:
    """A dataset split whose chunks are already encoded."""

    train: list[EmbeddingRecord]
    val: list[EmbeddingRecord]
    test: list[EmbeddingRecord] = field(default_factory=list)


_LABEL_INDEX = {LABEL_HUMAN: 0, LABEL_AI: 1}


def records_to_arrays(records: list[EmbeddingRecord], require_labels: bool = True):
    """Stack records into (pixels, labels); labels come back None when not required."""
    if not records:
        raise DataError("no records")
    x = scale_to_pixels(np.stack([r.vector for r in records]))
    y = None
    if require_labels:
        for r in records:
            if r.label is None:
                raise DataError(f"record {r.chunk_id!r} is unlabeled")
        y = np.array([_LABEL_INDEX[r.label] for r in records], dtype=np.int64)
    return x, y


def predict_ai(logits: torch.Tensor) -> np.ndarray:
    """Class decision per row; ties go to human (class 0)."""
    return (logits[:, 1] > logits[:, 0]).numpy()


def _eval_arrays(net: ZigZagNet, x: np.ndarray, y: np.ndarray, batch_size: int = 256):
    net.eval()
    total_loss = 0.0
    correct = 0
    with torch.no_grad():
        for start in range(0, len(x), batch_size):
            xb = torch.from_numpy(x[start : start + batch_size]).to(next(net.parameters()).dtype)
            yb = torch.from_numpy(y[start : start + batch_size])
            logits = net(xb)
            total_loss += cross_entropy(logits, yb).item() * len(yb)
            correct += int((torch.from_numpy(predict_ai(logits)).long() == yb).sum())
    return total_loss / len(x), correct / len(x)


def evaluate(net: ZigZagNet, records: list[EmbeddingRecord]) -> tuple[float, float]:
    """Eval-mode loss and accuracy over labeled records."""
    x, y = records_to_arrays(records)
    return _eval_arrays(net, x, y)


def refresh_norm_stats(net: ZigZagNet, x: np.ndarray, batch_size: int = 256) -> None:
    """Re-estimate normalization statistics over x with the current weights.

    Momentum-EMA stats lag the weights they were collected under, which makes
    frozen-stats evaluation unusable at small dataset scale; this replaces
    them with exact means over a deterministic forward pass (cumulative
    averaging), after which eval mode reflects the trained weights.
    """
    bns = [m for m in net.modules() if isinstance(m, nn.BatchNorm2d)]
    for m in bns:
        m.reset_running_stats()
        m.momentum = None
    net.train()
    with torch.no_grad():
        for start in range(0, len(x), batch_size):
            net(torch.from_numpy(x[start : start + batch_size]))
    for m in bns:
        m.momentum = BN_MOMENTUM
    net.eval()


def fit(
    split: EmbeddedSplit,
    config: TrainConfig,
    checkpoint_path: str | Path | None = None,
) -> tuple[ZigZagNet, list[EpochRecord]]:
    """Train on split.train, select by split.val accuracy.

    Per epoch: seeded shuffle, mini-batches (last partial batch kept),
    forward/loss/backward/SGD step, then a normalization-stat refresh over
    the training inputs, validation, and a scheduler step on val accuracy.
    Returns the parameters of the best-val-accuracy epoch (ties -> earliest)
    and the full history. When `checkpoint_path` is given, the best model is
    written there on every improvement.
    """
    x_train, y_train = records_to_arrays(split.train)
    x_val, y_val = records_to_arrays(split.val)

    net = build(config.model, config.seed)
    params = dict(net.named_parameters())
    velocity = {name: torch.zeros_like(p) for name, p in params.items()}
    sched_state = (
        initial_scheduler_state(config.sgd.lr, config.scheduler) if config.scheduler else None
    )
    lr = config.sgd.lr

    history: list[EpochRecord] = []
    best_acc = -1.0
    best_epoch = 0
    best_state: dict[str, torch.Tensor] | None = None

    n = len(x_train)
    for epoch in range(1, config.epochs + 1):
        eseed = epoch_seed(config.seed, epoch)
        order = philox("shuffle", eseed).permutation(n)
        loss_sum = 0.0
        correct = 0
        net.train()
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            xb = torch.from_numpy(x_train[idx])
            yb = torch.from_numpy(y_train[idx])
            logits = _run(net, xb, "train", fnv1a64("dropout", eseed, bi))
            loss = cross_entropy(logits, yb)
            if not torch.isfinite(loss):
                raise NumericsError(f"non-finite training loss at epoch {epoch}, batch {bi}")
            net.zero_grad(set_to_none=True)
            loss.backward()
            grads = {name: p.grad for name, p in params.items()}
            sgd_step(params, grads, velocity, config.sgd, lr)
            loss_sum += loss.item() * len(idx)
            correct += int((torch.from_numpy(predict_ai(logits.detach())).long() == yb).sum())

        refresh_norm_stats(net, x_train)
        val_loss, val_acc = _eval_arrays(net, x_val, y_val)
        history.append(
            EpochRecord(
                epoch=epoch,
                train_loss=loss_sum / n,
                train_acc=correct / n,
                val_loss=val_loss,
                val_acc=val_acc,
                lr=lr,
            )
        )

        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in net.state_dict().items()}
            if checkpoint_path is not None:
                _save_best(net, best_state, checkpoint_path, sched_state)

        if sched_state is not None:
            sched_state = scheduler_step(sched_state, val_acc, config.scheduler)
            lr = sched_state.lr

        if (
            config.early_stop_patience is not None
            and epoch - best_epoch >= config.early_stop_patience
        ):
            break

    best = clone_net(net)
    best.load_state_dict(best_state)
    best.eval()
    return best, history


def _save_best(net, state, path, sched_state) -> None:
    snapshot = clone_net(net)
    snapshot.load_state_dict(state)
    save_checkpoint(
        snapshot,
        path,
        scheduler_state=scheduler_state_to_dict(sched_state) if sched_state else None,
    )


def write_history(history: list[EpochRecord], path: str | Path) -> None:
    """One JSON object per line mirroring EpochRecord."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in history:
            fh.write(json.dumps(rec.__dict__) + "\n")


def read_history(path: str | Path) -> list[EpochRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(EpochRecord(**json.loads(line)))
    return out
