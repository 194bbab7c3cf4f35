"""Memory-guided context block.

The deep feature map is tiled into non-overlapping N x N windows. Each window
is summarised by a gated blend of its average- and max-pooled channel
vectors; that descriptor attends over a learnable bank of K slots, and the
read-out (through an FC and a sigmoid) re-weights the window's channels.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import functional as F
from .autodiff.nn import Linear, Module, parameter
from .autodiff.tensor import Tensor, concat
from .errors import ConfigError


def window_partition(x: Tensor, n: int) -> Tensor:
    """(B,M,H,W) -> (B*(H/n)*(W/n), M, n, n), tiles in row-major order per image."""
    B, M, H, W = x.shape
    if n < 1 or H % n or W % n:
        raise ConfigError(f"window {n} does not tile a {H}x{W} map")
    nh, nw = H // n, W // n
    return x.reshape(B, M, nh, n, nw, n).transpose(0, 2, 4, 1, 3, 5).reshape(B * nh * nw, M, n, n)


def window_reverse(patches: Tensor, B: int, H: int, W: int, n: int) -> Tensor:
    if H % n or W % n:
        raise ConfigError(f"window {n} does not tile a {H}x{W} map")
    nh, nw = H // n, W // n
    M = patches.shape[1]
    return patches.reshape(B, nh, nw, M, n, n).transpose(0, 3, 1, 4, 2, 5).reshape(B, M, H, W)


class MemoryBank(Module):
    """K learnable slots of width S, drawn from N(0, 1/S)."""

    def __init__(self, capacity: int, width: int, rng: np.random.Generator | None = None, dtype: str = "f32"):
        if capacity < 1:
            raise ConfigError(f"memory capacity must be >= 1, got {capacity}")
        rng = rng or np.random.default_rng(0)
        self.capacity = capacity
        self.slots = parameter(rng.standard_normal((capacity, width)) / math.sqrt(width), dtype)


def memory_read(fw: Tensor, slots: Tensor) -> tuple:
    """Scaled dot-product attention of descriptors (P,S) over slots (K,S).

    Returns the read-out (P,S) and the similarity weights (P,K).
    """
    S = slots.shape[1]
    if fw.shape[-1] != S:
        raise ConfigError(f"descriptor width {fw.shape[-1]} does not match memory width {S}")
    scores = (fw @ slots.transpose(1, 0)) * (1.0 / math.sqrt(S))
    weights = F.softmax(scores, axis=-1)
    return weights @ slots, weights


class MGC(Module):
    """Window size ``window`` and memory capacity ``capacity`` over ``channels`` feature maps.

    ``force_descriptor_gate`` and ``force_gate`` are test hooks that pin the
    descriptor blend weight or the final per-window gate to a constant.
    """

    def __init__(
        self,
        channels: int,
        window: int = 4,
        capacity: int = 8,
        rng: np.random.Generator | None = None,
        dtype: str = "f32",
    ):
        if window < 1:
            raise ConfigError(f"window must be positive, got {window}")
        rng = rng or np.random.default_rng(0)
        self.channels = channels
        self.window = window
        self.gate_fc = Linear(2 * channels, channels, rng=rng, dtype=dtype)
        self.memory = MemoryBank(capacity, channels, rng=rng, dtype=dtype)
        self.read_fc = Linear(channels, channels, rng=rng, dtype=dtype)
        self.force_descriptor_gate: float | None = None
        self.force_gate: float | None = None

    def descriptor(self, patches: Tensor) -> tuple:
        """(P,M,n,n) -> (gate f', weighted f_w), each (P,M)."""
        avg = patches.mean(axis=(2, 3))
        mx = patches.max(axis=(2, 3))
        if self.force_descriptor_gate is None:
            gate = F.sigmoid(self.gate_fc(concat([avg, mx], axis=1)))
        else:
            gate = Tensor(np.full(avg.shape, self.force_descriptor_gate, dtype=avg.data.dtype))
        return gate, gate * avg + (1.0 - gate) * mx

    def forward(self, x: Tensor) -> Tensor:
        B, M, H, W = x.shape
        if M != self.channels:
            raise ConfigError(f"MGC built for {self.channels} channels, got {M}")
        patches = window_partition(x, self.window)
        if self.force_gate is not None:
            g = Tensor(np.full((patches.shape[0], M), self.force_gate, dtype=x.data.dtype))
        else:
            _, fw = self.descriptor(patches)
            fhat, _ = memory_read(fw, self.memory.slots)
            g = F.sigmoid(self.read_fc(fhat))
        out = patches * g.reshape(patches.shape[0], M, 1, 1)
        return window_reverse(out, B, H, W, self.window)
