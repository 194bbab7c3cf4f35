"""Minimal module system: parameter discovery, train/eval mode, layers."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import functional as F
from .tensor import DTYPES, Tensor


def parameter(data, dtype: str = "f32") -> Tensor:
    return Tensor(np.asarray(data, dtype=DTYPES[dtype]), requires_grad=True)


class Module:
    """Base class; sub-modules, lists of modules and parameter tensors are found by attribute walk."""

    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def _children(self):
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            if isinstance(value, (Module, Tensor)):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Module, Tensor)):
                        yield f"{key}.{i}", item

    def named_parameters(self, prefix: str = ""):
        for key, value in self._children():
            name = f"{prefix}{key}"
            if isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif value.requires_grad:
                yield name, value

    def parameters(self) -> list:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = ""):
        for key in getattr(self, "_buffer_names", ()):
            yield f"{prefix}{key}", getattr(self, key)
        for key, value in self._children():
            if isinstance(value, Module):
                yield from value.named_buffers(f"{prefix}{key}.")

    def modules(self):
        yield self
        for _, value in self._children():
            if isinstance(value, Module):
                yield from value.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict()
        for name, p in self.named_parameters():
            state[name] = p.data
        for name, b in self.named_buffers():
            state[name] = b
        return state

    def load_state_dict(self, state: dict) -> None:
        own = dict(self.named_parameters())
        bufs = dict(self.named_buffers())
        missing = (set(own) | set(bufs)) - set(state)
        if missing:
            raise KeyError(f"state is missing entries: {sorted(missing)[:5]}")
        for name, p in own.items():
            src = np.asarray(state[name])
            if src.shape != p.data.shape:
                raise ValueError(f"{name}: shape {src.shape} != {p.data.shape}")
            p.data[...] = src
        for name, b in bufs.items():
            b[...] = np.asarray(state[name])


def _init_weight(rng: np.random.Generator, shape: tuple, fan_in: int, dtype: str) -> Tensor:
    return parameter(rng.standard_normal(shape) / np.sqrt(fan_in), dtype)


class Conv2d(Module):
    def __init__(
        self,
        cin: int,
        cout: int,
        kernel,
        stride=1,
        padding=0,
        groups: int = 1,
        bias: bool = True,
        rng: np.random.Generator | None = None,
        dtype: str = "f32",
    ):
        rng = rng or np.random.default_rng(0)
        kh, kw = F._pair(kernel)
        self.stride, self.padding, self.groups = stride, padding, groups
        fan_in = (cin // groups) * kh * kw
        self.weight = _init_weight(rng, (cout, cin // groups, kh, kw), fan_in, dtype)
        self.bias = parameter(np.zeros(cout), dtype) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class Linear(Module):
    def __init__(self, din: int, dout: int, bias: bool = True, rng=None, dtype: str = "f32"):
        rng = rng or np.random.default_rng(0)
        self.weight = _init_weight(rng, (dout, din), din, dtype)
        self.bias = parameter(np.zeros(dout), dtype) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.fully_connected(x, self.weight, self.bias)


class BatchNorm2d(Module):
    """Learnable affine plus running statistics (momentum 0.1, eps 1e-5 by default)."""

    _buffer_names = ("running_mean", "running_var")

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5, dtype: str = "f32"):
        self.gamma = parameter(np.ones(channels), dtype)
        self.beta = parameter(np.zeros(channels), dtype)
        self.running_mean = np.zeros(channels, dtype=DTYPES[dtype])
        self.running_var = np.ones(channels, dtype=DTYPES[dtype])
        self.momentum = momentum
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.batchnorm2d(
            x, self.gamma, self.beta, self.running_mean, self.running_var, self.training, self.momentum, self.eps
        )


class ConvBNReLU(Module):
    def __init__(self, cin: int, cout: int, stride: int = 1, rng=None, dtype: str = "f32"):
        self.conv = Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False, rng=rng, dtype=dtype)
        self.bn = BatchNorm2d(cout, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return F.relu(self.bn(self.conv(x)))


def count_parameters(module: Module) -> int:
    return int(sum(p.size for p in module.parameters()))
