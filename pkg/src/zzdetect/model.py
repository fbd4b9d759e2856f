"""ZigZag ResNet: embedding-to-image head plus a residual trunk whose channel
widths rise and fall inside [64, 256], and a monotone "vanilla" baseline for
the ablation. Both are instances of the same configurable net.

torch supplies tensors and autodiff; architecture, initialization, and the
checkpoint format are defined here. Builds are bit-deterministic given
(config, init_seed): every parameter tensor is drawn from a Philox stream
keyed by its name.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import (
    BadMagicError,
    BadVersionError,
    ConfigMismatchError,
    DataError,
    FileFormatError,
    NumericsError,
    TruncatedFileError,
)
from .prng import philox

CHANNEL_MIN = 64
CHANNEL_MAX = 256

ZZCK_MAGIC = b"ZZCK"
ZZCK_VERSION = 1

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class ZigZagConfig:
    """Architecture description; `arch` is "zigzag" or "vanilla".

    The default channel sequence fluctuates between 64 and 256 with
    downsampling at blocks {1, 3, 5} (spatial 16 -> 8 -> 4 -> 2) and lands at
    5,590,082 parameters. Non-default sequences (e.g. tiny test models) are
    valid as long as every width stays inside [64, 256].
    """

    arch: str = "zigzag"
    embed_dim: int = 512
    fc_dim: int = 768
    image_shape: tuple[int, int, int] = (3, 16, 16)
    stem_channels: int = 64
    block_channels: tuple[int, ...] = (64, 128, 256, 128, 256, 128, 256, 256)
    downsample_stages: frozenset[int] = frozenset({1, 3, 5})
    dropout_rate: float = 0.2
    num_classes: int = 2
    normalize_input: bool = False

    def validate(self) -> None:
        if self.arch not in ("zigzag", "vanilla"):
            raise ValueError(f"arch must be 'zigzag' or 'vanilla', got {self.arch!r}")
        c, h, w = self.image_shape
        if self.fc_dim != c * h * w:
            raise ValueError(f"fc_dim {self.fc_dim} != prod(image_shape) {c * h * w}")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be positive")
        if not self.block_channels:
            raise ValueError("block_channels must be non-empty")
        for ch in (self.stem_channels, *self.block_channels):
            if not CHANNEL_MIN <= ch <= CHANNEL_MAX:
                raise ValueError(f"channel width {ch} outside [{CHANNEL_MIN}, {CHANNEL_MAX}]")
        for idx in self.downsample_stages:
            if not 0 <= idx < len(self.block_channels):
                raise ValueError(f"downsample index {idx} out of range")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.num_classes != 2:
            raise ValueError("this detector is strictly 2-class")

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "embed_dim": self.embed_dim,
            "fc_dim": self.fc_dim,
            "image_shape": list(self.image_shape),
            "stem_channels": self.stem_channels,
            "block_channels": list(self.block_channels),
            "downsample_stages": sorted(self.downsample_stages),
            "dropout_rate": self.dropout_rate,
            "num_classes": self.num_classes,
            "normalize_input": self.normalize_input,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ZigZagConfig":
        return cls(
            arch=d["arch"],
            embed_dim=d["embed_dim"],
            fc_dim=d["fc_dim"],
            image_shape=tuple(d["image_shape"]),
            stem_channels=d["stem_channels"],
            block_channels=tuple(d["block_channels"]),
            downsample_stages=frozenset(d["downsample_stages"]),
            dropout_rate=d["dropout_rate"],
            num_classes=d["num_classes"],
            normalize_input=d.get("normalize_input", False),
        )


def vanilla_config() -> ZigZagConfig:
    """ResNet-18-style baseline: four 2-block stages with monotone widths.

    Stage widths [64, 128, 224, 256] are calibrated so the parameter count
    (5,059,074) sits within +/-10% of the zigzag model's 5.28M budget.
    """
    return ZigZagConfig(
        arch="vanilla",
        block_channels=(64, 64, 128, 128, 224, 224, 256, 256),
        downsample_stages=frozenset({2, 4, 6}),
    )


class _SeededDropout(nn.Module):
    """Dropout whose mask comes from an explicitly seeded generator."""

    def __init__(self, p: float):
        super().__init__()
        self.p = p
        self.generator: torch.Generator | None = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if not self.training or self.p == 0.0:
            return x
        keep = torch.rand(x.shape, generator=self.generator, dtype=x.dtype) >= self.p
        return x * keep / (1.0 - self.p)


class _BasicBlock(nn.Module):
    """Two 3x3 convolutions with batch norm; identity shortcut when the shape
    is preserved, 1x1 projection on channel or stride change."""

    def __init__(self, in_ch: int, out_ch: int, stride: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch, eps=BN_EPS, momentum=BN_MOMENTUM)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch, eps=BN_EPS, momentum=BN_MOMENTUM)
        if stride != 1 or in_ch != out_ch:
            self.proj = nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False)
            self.proj_bn = nn.BatchNorm2d(out_ch, eps=BN_EPS, momentum=BN_MOMENTUM)
        else:
            self.proj = None
            self.proj_bn = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = torch.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        shortcut = self.proj_bn(self.proj(x)) if self.proj is not None else x
        return torch.relu(out + shortcut)


class ZigZagNet(nn.Module):
    def __init__(self, config: ZigZagConfig):
        super().__init__()
        config.validate()
        self.config = config
        self.fc = nn.Linear(config.embed_dim, config.fc_dim)
        self.stem_conv = nn.Conv2d(config.image_shape[0], config.stem_channels, 3, padding=1, bias=False)
        self.stem_bn = nn.BatchNorm2d(config.stem_channels, eps=BN_EPS, momentum=BN_MOMENTUM)
        blocks = []
        in_ch = config.stem_channels
        for i, out_ch in enumerate(config.block_channels):
            stride = 2 if i in config.downsample_stages else 1
            blocks.append(_BasicBlock(in_ch, out_ch, stride))
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        self.dropout = _SeededDropout(config.dropout_rate)
        self.head = nn.Linear(in_ch, config.num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        cfg = self.config
        if cfg.normalize_input:
            x = x / 255.0
        img = self.fc(x).view(-1, *cfg.image_shape)
        out = torch.relu(self.stem_bn(self.stem_conv(img)))
        for block in self.blocks:
            out = block(out)
        out = out.mean(dim=(2, 3))
        out = self.dropout(out)
        return self.head(out)


def build(config: ZigZagConfig, init_seed: int, dtype: torch.dtype = torch.float32) -> ZigZagNet:
    """Construct and deterministically initialize a net.

    Weights with >=2 dims get fan-in-scaled normals (std = sqrt(2/fan_in));
    1-dim weights (norm scales) become ones, biases zeros. Each tensor is
    drawn from its own name-keyed Philox stream, so the same (config, seed)
    yields bit-identical parameters regardless of iteration order.
    """
    config.validate()
    net = ZigZagNet(config).to(dtype)
    with torch.no_grad():
        for name, p in net.named_parameters():
            if p.ndim >= 2:
                fan_in = math.prod(p.shape[1:])
                std = math.sqrt(2.0 / fan_in)
                draw = philox("model-init", init_seed, name).standard_normal(p.numel()) * std
                p.copy_(torch.from_numpy(draw.reshape(tuple(p.shape))).to(dtype))
            elif name.endswith(".weight"):
                p.fill_(1.0)
            else:
                p.zero_()
    net.eval()
    return net


def build_vanilla(init_seed: int, dtype: torch.dtype = torch.float32) -> ZigZagNet:
    """The ablation baseline: `build` with the calibrated vanilla config."""
    return build(vanilla_config(), init_seed, dtype)


def param_count(net: ZigZagNet) -> int:
    """Exact number of trainable scalars (buffers like running stats excluded)."""
    return sum(p.numel() for p in net.parameters())


def _as_input(net: ZigZagNet, batch) -> torch.Tensor:
    dtype = next(net.parameters()).dtype
    x = torch.as_tensor(np.asarray(batch), dtype=dtype)
    if x.ndim != 2:
        raise DataError(f"batch must be 2-d (B, {net.config.embed_dim}), got shape {tuple(x.shape)}")
    if x.shape[0] == 0:
        raise DataError("batch is empty")
    if x.shape[1] != net.config.embed_dim:
        raise DataError(f"input length {x.shape[1]}, expected {net.config.embed_dim}")
    return x


def _run(net: ZigZagNet, x: torch.Tensor, mode: str, dropout_seed: int) -> torch.Tensor:
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "train":
        net.train()
        gen = torch.Generator()
        gen.manual_seed(dropout_seed & 0x7FFFFFFFFFFFFFFF)
        net.dropout.generator = gen
    else:
        net.eval()
    return net(x)


def _locate_nonfinite_layer(net: ZigZagNet, x: torch.Tensor, mode: str, dropout_seed: int) -> str:
    bad = []
    hooks = []

    def make_hook(name):
        def hook(_mod, _inp, out):
            if not bad and isinstance(out, torch.Tensor) and not torch.isfinite(out).all():
                bad.append(name)
        return hook

    for name, mod in net.named_modules():
        if name:
            hooks.append(mod.register_forward_hook(make_hook(name)))
    try:
        with torch.no_grad():
            _run(net, x, mode, dropout_seed)
    finally:
        for h in hooks:
            h.remove()
    return bad[0] if bad else "output"


def forward(net: ZigZagNet, batch, mode: str = "eval", dropout_seed: int = 0) -> torch.Tensor:
    """Run the pipeline: affine 512->768, reshape to 3x16x16, stem, residual
    blocks, global average pool, dropout (train mode), classifier.

    Returns detached (B, 2) logits; column 0 is human, column 1 is ai.
    Eval mode is deterministic; train mode is deterministic given dropout_seed.
    """
    x = _as_input(net, batch)
    if mode == "eval":
        with torch.no_grad():
            out = _run(net, x, mode, dropout_seed)
    else:
        out = _run(net, x, mode, dropout_seed)
    if not torch.isfinite(out).all():
        layer = _locate_nonfinite_layer(net, x, mode, dropout_seed)
        raise NumericsError(f"non-finite activations first seen in layer {layer!r}")
    return out.detach()


def gradients(net: ZigZagNet, batch, labels, mode: str = "train", dropout_seed: int = 0) -> dict[str, torch.Tensor]:
    """Gradient of mean cross-entropy over the batch w.r.t. every parameter.

    The loss path is deterministic: dropout is seeded and batch-norm uses
    batch statistics in train mode, frozen statistics in eval mode.
    """
    from .optim import cross_entropy

    x = _as_input(net, batch)
    y = torch.as_tensor(np.asarray(labels), dtype=torch.long)
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise DataError(f"labels shape {tuple(y.shape)} does not match batch of {x.shape[0]}")
    net.zero_grad(set_to_none=True)
    logits = _run(net, x, mode, dropout_seed)
    loss = cross_entropy(logits, y)
    loss.backward()
    grads = {}
    for name, p in net.named_parameters():
        grads[name] = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
    net.zero_grad(set_to_none=True)
    return grads


# ---------------------------------------------------------------------------
# Checkpoints: magic "ZZCK", version, config JSON, then named float32 tensors.

def _float_state(net: ZigZagNet) -> dict[str, torch.Tensor]:
    # num_batches_tracked (int64) is inert with fixed momentum and is not serialized
    return {k: v for k, v in net.state_dict().items() if v.is_floating_point()}


def save_checkpoint(net: ZigZagNet, path: str | Path, scheduler_state: dict | None = None) -> None:
    """Write net (config + all float tensors, bit-exact) to a ZZCK file.

    Only float32 nets are checkpointable; float64 builds exist for gradient
    validation and never ship.
    """
    if next(net.parameters()).dtype != torch.float32:
        raise ValueError("only float32 nets can be checkpointed")
    header = {"config": net.config.to_dict(), "scheduler_state": scheduler_state}
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    state = _float_state(net)
    with open(path, "wb") as fh:
        fh.write(ZZCK_MAGIC)
        fh.write(struct.pack("<HI", ZZCK_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(struct.pack("<I", len(state)))
        for name, tensor in state.items():
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<B", tensor.ndim))
            for dim in tensor.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(tensor.detach().numpy().astype("<f4", copy=False).tobytes())


def load_checkpoint(path: str | Path, expected_arch: str | None = None) -> tuple[ZigZagNet, dict | None]:
    """Read a ZZCK file back into a net built from its embedded config.

    Returns (net, scheduler_state). Raises ConfigMismatchError when
    `expected_arch` disagrees with the embedded config or a stored tensor
    does not fit the architecture; no partial model is ever returned.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != ZZCK_MAGIC:
        raise BadMagicError(f"{path}: not a ZZCK checkpoint")
    if len(data) < 10:
        raise TruncatedFileError(f"{path}: header truncated")
    version, header_len = struct.unpack_from("<HI", data, 4)
    if version != ZZCK_VERSION:
        raise BadVersionError(f"{path}: unsupported checkpoint version {version}")
    off = 10
    if off + header_len + 4 > len(data):
        raise TruncatedFileError(f"{path}: header truncated")
    try:
        header = json.loads(data[off : off + header_len].decode("utf-8"))
        config = ZigZagConfig.from_dict(header["config"])
    except (json.JSONDecodeError, KeyError, UnicodeDecodeError) as exc:
        raise FileFormatError(f"{path}: bad checkpoint header: {exc}") from exc
    if expected_arch is not None and config.arch != expected_arch:
        raise ConfigMismatchError(
            f"{path}: checkpoint holds a {config.arch!r} model, expected {expected_arch!r}"
        )
    off += header_len
    (count,) = struct.unpack_from("<I", data, off)
    off += 4

    net = ZigZagNet(config).to(torch.float32)
    expected = _float_state(net)
    loaded: dict[str, torch.Tensor] = {}
    for _ in range(count):
        if off + 2 > len(data):
            raise TruncatedFileError(f"{path}: truncated in tensor table")
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        if off + name_len + 1 > len(data):
            raise TruncatedFileError(f"{path}: truncated in tensor table")
        name = data[off : off + name_len].decode("utf-8")
        off += name_len
        ndim = data[off]
        off += 1
        if off + 4 * ndim > len(data):
            raise TruncatedFileError(f"{path}: truncated in tensor shape")
        shape = struct.unpack_from(f"<{ndim}I", data, off) if ndim else ()
        off += 4 * ndim
        numel = math.prod(shape) if shape else 1
        if off + 4 * numel > len(data):
            raise TruncatedFileError(f"{path}: truncated in tensor payload for {name!r}")
        if name not in expected:
            raise ConfigMismatchError(f"{path}: unexpected tensor {name!r} for this config")
        if tuple(expected[name].shape) != tuple(shape):
            raise ConfigMismatchError(
                f"{path}: tensor {name!r} has shape {tuple(shape)}, config implies "
                f"{tuple(expected[name].shape)}"
            )
        arr = np.frombuffer(data, dtype="<f4", count=numel, offset=off).copy().reshape(shape)
        loaded[name] = torch.from_numpy(arr)
        off += 4 * numel
    if off != len(data):
        raise FileFormatError(f"{path}: {len(data) - off} trailing bytes")
    missing = sorted(set(expected) - set(loaded))
    if missing:
        raise ConfigMismatchError(f"{path}: missing tensors {missing[:3]}...")
    net.load_state_dict(loaded, strict=False)
    net.eval()
    return net, header.get("scheduler_state")


def clone_net(net: ZigZagNet) -> ZigZagNet:
    """Independent copy sharing nothing with the original."""
    twin = ZigZagNet(net.config).to(next(net.parameters()).dtype)
    twin.load_state_dict({k: v.clone() for k, v in net.state_dict().items()})
    twin.eval()
    return twin
