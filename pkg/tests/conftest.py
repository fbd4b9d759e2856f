import numpy as np
import pytest
import torch
from hypothesis import settings

from zzdetect.embedding import EmbeddingRecord
from zzdetect.model import ZigZagConfig
from zzdetect.prng import philox

torch.set_num_threads(2)

settings.register_profile("ci", deadline=None, max_examples=50)
settings.load_profile("ci")


def tiny_config(**overrides) -> ZigZagConfig:
    """2-block model for fast tests; channels stay inside [64, 256]."""
    base = dict(
        block_channels=(64, 64),
        downsample_stages=frozenset({1}),
        dropout_rate=0.0,
    )
    base.update(overrides)
    return ZigZagConfig(**base)


def two_cluster_records(
    n_per_class: int, separation: float, seed: int, sigma: float = 1 / 16
) -> list[EmbeddingRecord]:
    """Two Gaussians in embedding space, each center `separation` sigma units
    from the midpoint along a shared random unit direction (so the class means
    sit 2*separation*sigma apart). Labels alternate human/ai; order shuffled."""
    rng = philox("two-clusters", seed)
    direction = rng.standard_normal(512)
    direction /= np.linalg.norm(direction)
    records = []
    for label, sign in (("human", -1.0), ("ai", 1.0)):
        center = sign * separation * sigma * direction
        for i in range(n_per_class):
            vec = center + sigma * rng.standard_normal(512)
            records.append(
                EmbeddingRecord(chunk_id=f"{label}-{i}", label=label, vector=vec.astype(np.float32))
            )
    order = rng.permutation(len(records))
    return [records[i] for i in order]


@pytest.fixture
def tiny_net():
    from zzdetect.model import build

    return build(tiny_config(), 0)


def central_difference_check(net, x, y, n_coords, h=1e-5, coord_seed=11, dropout_seed=5):
    """Compare autograd against central differences on `n_coords` coordinates.

    The oracle side uses only loss evaluations. A coordinate whose +/-h window
    straddles a ReLU kink gives an invalid difference quotient regardless of
    the gradient's correctness; such windows are detected by comparing the
    h and h/10 quotients (pure finite differences, no autograd) and redrawn.
    Returns (max_relative_error, n_redrawn); relative error denominators are
    floored at 1e-4 so near-zero gradients are compared absolutely.
    """
    from zzdetect.model import _run, gradients
    from zzdetect.optim import cross_entropy

    grads = gradients(net, x, y, mode="train", dropout_seed=dropout_seed)
    params = dict(net.named_parameters())
    y_t = torch.from_numpy(np.asarray(y))

    def loss_at() -> float:
        logits = _run(net, torch.from_numpy(x), "train", dropout_seed)
        return cross_entropy(logits, y_t).item()

    def quotient(flat, i, orig, step) -> float:
        with torch.no_grad():
            flat[i] = orig + step
            plus = loss_at()
            flat[i] = orig - step
            minus = loss_at()
            flat[i] = orig
        return (plus - minus) / (2 * step)

    names = sorted(params)
    rng = np.random.default_rng(coord_seed)
    max_rel = 0.0
    checked = redrawn = 0
    while checked < n_coords:
        name = names[int(rng.integers(len(names)))]
        flat = params[name].detach().view(-1)
        i = int(rng.integers(flat.numel()))
        orig = flat[i].item()
        fd = quotient(flat, i, orig, h)
        fd_small = quotient(flat, i, orig, h / 10)
        if abs(fd - fd_small) > 1e-7 * max(1.0, abs(fd_small)):
            redrawn += 1
            assert redrawn < 5 * n_coords, "too many kink-contaminated windows"
            continue
        an = grads[name].view(-1)[i].item()
        max_rel = max(max_rel, abs(fd - an) / max(abs(fd), abs(an), 1e-4))
        checked += 1
    return max_rel, redrawn
