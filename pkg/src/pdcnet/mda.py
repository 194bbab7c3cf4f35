"""Multi-direction aggregation block.

Pipeline: depthwise 1x1 -> channel split -> one strip direction per part ->
concat -> BN -> ReLU -> gate by a 3x3 max-pool of the raw input -> pointwise 1x1.
"""

from __future__ import annotations

import numpy as np

from .autodiff import functional as F
from .autodiff.nn import BatchNorm2d, Conv2d, Module
from .autodiff.tensor import Tensor, concat, split
from .errors import ConfigError
from .strip import StripConv, StripDirection

VARIANTS = ("full", "dual", "pconv")

_VARIANT_DIRECTIONS = {
    "full": (
        StripDirection.HORIZONTAL,
        StripDirection.VERTICAL,
        StripDirection.MAIN_DIAGONAL,
        StripDirection.ANTI_DIAGONAL,
    ),
    "dual": (StripDirection.HORIZONTAL, StripDirection.VERTICAL),
    "pconv": (),
}


class MDA(Module):
    def __init__(
        self,
        channels: int,
        variant: str = "full",
        kernel_len: int = 9,
        rng: np.random.Generator | None = None,
        dtype: str = "f32",
    ):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown MDA variant {variant!r}; choose from {VARIANTS}")
        directions = _VARIANT_DIRECTIONS[variant]
        parts = max(len(directions), 1)
        if channels % parts:
            raise ConfigError(f"MDA variant {variant!r} needs channels divisible by {parts}, got {channels}")
        rng = rng or np.random.default_rng(0)
        self.channels = channels
        self.variant = variant
        self.entry = Conv2d(channels, channels, 1, groups=channels, rng=rng, dtype=dtype)
        self.strips = [StripConv(channels // parts, d, kernel_len, rng=rng, dtype=dtype) for d in directions]
        self.bn = BatchNorm2d(channels, dtype=dtype)
        self.exit = Conv2d(channels, channels, 1, rng=rng, dtype=dtype)

    def strip_features(self, x: Tensor) -> Tensor:
        """Concatenated per-direction responses before normalization."""
        h = self.entry(x)
        if not self.strips:
            return h
        pieces = split(h, len(self.strips), axis=1)
        return concat([s(p) for s, p in zip(self.strips, pieces)], axis=1)

    def forward(self, x: Tensor) -> Tensor:
        agg = F.relu(self.bn(self.strip_features(x)))
        detail = F.pool2d("max", x, 3, stride=1, padding=1)
        return self.exit(agg * detail)
