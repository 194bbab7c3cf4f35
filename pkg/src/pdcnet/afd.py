"""Adaptive fusion decoder: a dense mixture of four separable-conv experts."""

from __future__ import annotations

import numpy as np

from .autodiff import functional as F
from .autodiff.nn import Conv2d, Linear, Module
from .autodiff.tensor import Tensor, concat, split
from .errors import ConfigError, DimensionError

EXPERT_KERNELS = (3, 5, 7, 9)


def patch_shuffle(features) -> list:
    """Mixed feature i is the concatenation of channel-quarter i of every stage.

    The mapping is an involution: applying it twice returns the inputs.
    """
    features = list(features)
    if len(features) != 4:
        raise DimensionError(f"patch_shuffle takes 4 stage features, got {len(features)}")
    shape = features[0].shape
    for j, f in enumerate(features):
        if f.shape != shape:
            raise DimensionError(f"stage {j} has shape {f.shape}, stage 0 has {shape}")
    if shape[1] % 4:
        raise DimensionError(f"channel axis 1 of size {shape[1]} is not divisible by 4")
    quarters = [split(f, 4, axis=1) for f in features]
    return [concat([quarters[j][i] for j in range(4)], axis=1) for i in range(4)]


patch_unshuffle = patch_shuffle


class Expert(Module):
    """Depthwise 1 x n followed by depthwise n x 1, shape preserving."""

    def __init__(self, channels: int, n: int, rng=None, dtype: str = "f32"):
        if n % 2 == 0:
            raise ConfigError(f"expert kernel size must be odd, got {n}")
        self.n = n
        self.row = Conv2d(channels, channels, (1, n), padding=(0, n // 2), groups=channels, rng=rng, dtype=dtype)
        self.col = Conv2d(channels, channels, (n, 1), padding=(n // 2, 0), groups=channels, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return self.col(self.row(x))


class AFD(Module):
    """Projects four stage features to a common width and stride, then fuses experts.

    ``force_expert_weights`` (length-4 sequence) replaces the learned sigmoid
    weights; it is a test hook.
    """

    def __init__(
        self,
        in_channels,
        width: int = 64,
        num_classes: int = 3,
        upsample=(1, 2, 4, 8),
        rng: np.random.Generator | None = None,
        dtype: str = "f32",
    ):
        if width % 4:
            raise ConfigError(f"AFD width must be divisible by 4, got {width}")
        if len(in_channels) != 4 or len(upsample) != 4:
            raise ConfigError("AFD takes exactly four stages")
        rng = rng or np.random.default_rng(0)
        self.width = width
        self.num_classes = num_classes
        self.upsample = tuple(int(u) for u in upsample)
        self.proj = [Conv2d(c, width, 1, rng=rng, dtype=dtype) for c in in_channels]
        self.experts = [Expert(width, n, rng=rng, dtype=dtype) for n in EXPERT_KERNELS]
        self.squeeze = Conv2d(4 * width, 4 * width, 1, groups=4 * width, rng=rng, dtype=dtype)
        self.fusion = Linear(4 * width, 4, rng=rng, dtype=dtype)
        self.heads = Conv2d(4 * width, 4 * num_classes, 1, groups=4, rng=rng, dtype=dtype)
        self.force_expert_weights = None

    def align(self, feats) -> list:
        return [F.bilinear_upsample(p(f), u) for p, f, u in zip(self.proj, feats, self.upsample)]

    def expert_logits(self, feats) -> tuple:
        """Returns per-expert logits (B,4,classes,H,W) and the fused feature f-hat."""
        mixed = patch_shuffle(self.align(feats))
        fhat = self.squeeze(concat([e(m) for e, m in zip(self.experts, mixed)], axis=1))
        heads = self.heads(fhat)
        B, _, H, W = heads.shape
        return heads.reshape(B, 4, self.num_classes, H, W), fhat

    def expert_weights(self, fhat: Tensor) -> Tensor:
        if self.force_expert_weights is not None:
            w = np.asarray(self.force_expert_weights, dtype=fhat.data.dtype)
            return Tensor(np.broadcast_to(w, (fhat.shape[0], 4)).copy())
        return F.sigmoid(self.fusion(F.global_avg_pool(fhat)))

    def forward(self, feats) -> Tensor:
        if len(feats) != 4:
            raise DimensionError(f"AFD takes 4 stage features, got {len(feats)}")
        logits, fhat = self.expert_logits(feats)
        w = self.expert_weights(fhat)
        B = w.shape[0]
        return (logits * w.reshape(B, 4, 1, 1, 1)).sum(axis=1)
