"""SGD with momentum/Nesterov/weight decay, cross-entropy, and the zigzag
plateau scheduler that multiplies the learning rate up on sustained
improvement, down on sustained deterioration, and periodically restarts to
the best rate seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class SGDConfig:
    lr: float = 0.001
    momentum: float = 0.8
    weight_decay: float = 0.005
    nesterov: bool = True

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(frozen=True)
class SchedulerConfig:
    mode: str = "max"
    up_factor: float = 0.3
    down_factor: float = 0.5
    up_patience: int = 1
    down_patience: int = 1
    restart_after: int = 30

    def __post_init__(self) -> None:
        if self.mode not in ("min", "max"):
            raise ValueError(f"mode must be 'min' or 'max', got {self.mode!r}")
        if self.up_factor <= 0:
            raise ValueError(f"up_factor must be positive, got {self.up_factor}")
        if not 0.0 < self.down_factor < 1.0:
            raise ValueError(f"down_factor must be in (0, 1), got {self.down_factor}")
        if self.up_patience < 0 or self.down_patience < 0:
            raise ValueError("patience values must be >= 0")
        if self.restart_after < 1:
            raise ValueError(f"restart_after must be >= 1, got {self.restart_after}")


@dataclass(frozen=True)
class SchedulerState:
    lr: float
    best_lr: float
    prev_metric: float
    num_good_epochs: int = 0
    num_bad_epochs: int = 0
    num_epochs: int = 0


def initial_scheduler_state(lr: float, config: SchedulerConfig) -> SchedulerState:
    """Fresh state: prev_metric is the mode's worst value so the first epoch
    always counts as an improvement and seeds best_lr; best_lr starts at lr so
    a restart before any improvement is a no-op."""
    prev = -math.inf if config.mode == "max" else math.inf
    return SchedulerState(lr=lr, best_lr=lr, prev_metric=prev)


def scheduler_step(state: SchedulerState, metric: float, config: SchedulerConfig) -> SchedulerState:
    """One epoch-end transition; pure function of (state, metric, config).

    On strict improvement: remember the current lr as best, and after more
    than up_patience consecutive good epochs multiply lr by (1 + up_factor).
    Otherwise the mirrored rule shrinks lr by (1 - down_factor). Whenever the
    epoch counter hits a multiple of restart_after, lr snaps back to best_lr.
    """
    if not math.isfinite(metric):
        raise ValueError(f"scheduler metric must be finite, got {metric!r}")
    lr = state.lr
    best_lr = state.best_lr
    good = state.num_good_epochs
    bad = state.num_bad_epochs
    num_epochs = state.num_epochs + 1

    improved = metric < state.prev_metric if config.mode == "min" else metric > state.prev_metric
    if improved:
        best_lr = lr
        bad = 0
        good += 1
        if good > config.up_patience:
            lr = lr * (1.0 + config.up_factor)
            good = 0
    else:
        bad += 1
        good = 0
        if bad > config.down_patience:
            lr = lr * (1.0 - config.down_factor)
            bad = 0

    if num_epochs % config.restart_after == 0:
        lr = best_lr

    return SchedulerState(
        lr=lr,
        best_lr=best_lr,
        prev_metric=metric,
        num_good_epochs=good,
        num_bad_epochs=bad,
        num_epochs=num_epochs,
    )


def scheduler_state_to_dict(state: SchedulerState) -> dict:
    d = {
        "lr": state.lr,
        "best_lr": state.best_lr,
        "prev_metric": state.prev_metric,
        "num_good_epochs": state.num_good_epochs,
        "num_bad_epochs": state.num_bad_epochs,
        "num_epochs": state.num_epochs,
    }
    # JSON has no +/-inf; the initial prev_metric round-trips as a string
    if math.isinf(state.prev_metric):
        d["prev_metric"] = "inf" if state.prev_metric > 0 else "-inf"
    return d


def scheduler_state_from_dict(d: dict) -> SchedulerState:
    prev = d["prev_metric"]
    if isinstance(prev, str):
        prev = math.inf if prev == "inf" else -math.inf
    return SchedulerState(
        lr=d["lr"],
        best_lr=d["best_lr"],
        prev_metric=prev,
        num_good_epochs=d["num_good_epochs"],
        num_bad_epochs=d["num_bad_epochs"],
        num_epochs=d["num_epochs"],
    )


def sgd_step(
    params: dict[str, torch.Tensor],
    grads: dict[str, torch.Tensor],
    velocity: dict[str, torch.Tensor],
    config: SGDConfig,
    lr: float,
) -> None:
    """In-place SGD update of params and velocity.

    g' = g + weight_decay * w
    v  <- momentum * v + g'
    w  <- w - lr * (g' + momentum * v)   (Nesterov)
    w  <- w - lr * v                     (plain momentum)
    """
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    with torch.no_grad():
        for name, w in params.items():
            if name not in grads:
                raise KeyError(f"missing gradient for parameter {name!r}")
            g = grads[name]
            if g.shape != w.shape:
                raise ValueError(
                    f"gradient shape {tuple(g.shape)} != parameter shape {tuple(w.shape)} for {name!r}"
                )
            eff = g + config.weight_decay * w if config.weight_decay else g
            v = velocity[name]
            v.mul_(config.momentum).add_(eff)
            update = eff + config.momentum * v if config.nesterov else v
            w.sub_(lr * update)


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean of -log softmax(logits)[label]; log-sum-exp stabilized."""
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise ValueError(f"logits must be a non-empty (B, C) tensor, got {tuple(logits.shape)}")
    if labels.shape != logits.shape[:1]:
        raise ValueError(f"labels shape {tuple(labels.shape)} != batch {logits.shape[0]}")
    log_z = torch.logsumexp(logits, dim=1)
    picked = logits.gather(1, labels.view(-1, 1)).squeeze(1)
    return (log_z - picked).mean()
