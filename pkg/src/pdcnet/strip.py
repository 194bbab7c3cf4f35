"""Depthwise strip convolutions along four lattice directions."""

from __future__ import annotations

import enum

import numpy as np

from .autodiff.nn import Module, parameter
from .autodiff.tensor import Tensor, as_tensor, make_result
from .errors import ConfigError, DimensionError


class StripDirection(enum.Enum):
    """Direction tag with its (dy, dx) step on the pixel lattice."""

    HORIZONTAL = (0, 1)
    VERTICAL = (1, 0)
    MAIN_DIAGONAL = (1, 1)
    ANTI_DIAGONAL = (-1, 1)

    @property
    def step(self) -> tuple:
        return self.value

    @property
    def tag(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, tag: "str | StripDirection") -> "StripDirection":
        if isinstance(tag, cls):
            return tag
        try:
            return cls[str(tag).upper()]
        except KeyError:
            names = ", ".join(d.tag for d in cls)
            raise ConfigError(f"unknown strip direction {tag!r}; choose from {names}") from None


DIRECTIONS = tuple(StripDirection)


def _check(x: Tensor, weight: Tensor, bias: Tensor | None):
    if x.ndim != 4:
        raise DimensionError(f"strip_conv input must be (B,C,H,W), got shape {x.shape}")
    C = x.shape[1]
    if weight.ndim != 2 or weight.shape[0] != C:
        raise DimensionError(f"channel axis 1: input has {C} channels, kernel has {weight.shape[0]}")
    if weight.shape[1] % 2 == 0:
        raise ConfigError(f"kernel length must be odd, got {weight.shape[1]}")
    if bias is not None and bias.shape != (C,):
        raise DimensionError(f"bias must have {C} entries, got shape {bias.shape}")


def strip_conv(x: Tensor, weight: Tensor, direction, bias: Tensor | None = None) -> Tensor:
    """out[b,c,y,x] = bias[c] + sum_t w[c,t+r] * in[b,c,y+t*dy,x+t*dx], zero outside the map."""
    x, weight = as_tensor(x), as_tensor(weight)
    _check(x, weight, bias)
    dy, dx = StripDirection.parse(direction).step
    B, C, H, W = x.shape
    L = weight.shape[1]
    r = L // 2
    py, px = r * abs(dy), r * abs(dx)
    xp = np.pad(x.data, ((0, 0), (0, 0), (py, py), (px, px))) if (py or px) else x.data
    wd = weight.data
    offsets = [(py + t * dy, px + t * dx) for t in range(-r, r + 1)]

    out = np.zeros((B, C, H, W), dtype=np.result_type(x.data, wd))
    for k, (oy, ox) in enumerate(offsets):
        out += xp[:, :, oy : oy + H, ox : ox + W] * wd[:, k][None, :, None, None]
    if bias is not None:
        out += bias.data[None, :, None, None]
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gx = gw = None
        if weight.requires_grad:
            gw = np.empty_like(wd)
            for k, (oy, ox) in enumerate(offsets):
                gw[:, k] = (g * xp[:, :, oy : oy + H, ox : ox + W]).sum(axis=(0, 2, 3))
        if x.requires_grad:
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for k, (oy, ox) in enumerate(offsets):
                gxp[:, :, oy : oy + H, ox : ox + W] += g * wd[:, k][None, :, None, None]
            gx = gxp[:, :, py : py + H, px : px + W]
        res = [gx, gw]
        if bias is not None:
            res.append(g.sum(axis=(0, 2, 3)))
        return res

    return make_result(out, inputs, "strip_conv", backward)


def strip_conv_oracle(x, weight, direction, bias=None) -> np.ndarray:
    """Unoptimised five-loop reference; test use only."""
    x = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    w = np.asarray(weight.data if isinstance(weight, Tensor) else weight, dtype=np.float64)
    b = None if bias is None else np.asarray(bias.data if isinstance(bias, Tensor) else bias, dtype=np.float64)
    if x.shape[1] != w.shape[0]:
        raise DimensionError(f"channel axis 1: input has {x.shape[1]} channels, kernel has {w.shape[0]}")
    dy, dx = StripDirection.parse(direction).step
    B, C, H, W = x.shape
    r = w.shape[1] // 2
    out = np.zeros_like(x)
    for bi in range(B):
        for c in range(C):
            for y in range(H):
                for xx in range(W):
                    acc = 0.0 if b is None else float(b[c])
                    for t in range(-r, r + 1):
                        yy, xs = y + t * dy, xx + t * dx
                        if 0 <= yy < H and 0 <= xs < W:
                            acc += w[c, t + r] * x[bi, c, yy, xs]
                    out[bi, c, y, xx] = acc
    return out


class StripConv(Module):
    """Learnable depthwise strip kernel, one row of ``kernel_len`` taps per channel."""

    def __init__(
        self,
        channels: int,
        direction,
        kernel_len: int = 9,
        bias: bool = True,
        rng: np.random.Generator | None = None,
        dtype: str = "f32",
    ):
        if kernel_len < 1 or kernel_len % 2 == 0:
            raise ConfigError(f"kernel_len must be odd and positive, got {kernel_len}")
        rng = rng or np.random.default_rng(0)
        self.channels = channels
        self.kernel_len = kernel_len
        self.direction = StripDirection.parse(direction)
        self.weight = parameter(rng.standard_normal((channels, kernel_len)) / np.sqrt(kernel_len), dtype)
        self.bias = parameter(np.zeros(channels), dtype) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return strip_conv(x, self.weight, self.direction, self.bias)
