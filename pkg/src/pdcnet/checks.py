"""Gradient-check suite over primitives, blocks and the full network (f64)."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .afd import AFD
from .autodiff import functional as F
from .autodiff.gradcheck import gradcheck
from .autodiff.tensor import Tensor, concat, split
from .mda import MDA
from .mgc import MGC
from .network import EncoderConfig, PdcNet, PdcNetConfig
from .strip import DIRECTIONS, strip_conv

MODULE_TOL = 1e-4
NETWORK_TOL = 1e-3


def _t(rng, *shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _randomize_bn(module, rng) -> None:
    for name, buf in module.named_buffers():
        if name.endswith("running_mean"):
            buf[...] = 0.1 * rng.standard_normal(buf.shape)
        elif name.endswith("running_var"):
            buf[...] = rng.uniform(0.5, 1.5, buf.shape)
    for name, p in module.named_parameters():
        if name.endswith("gamma"):
            p.data[...] = rng.uniform(0.5, 1.5, p.shape)
        elif name.endswith("beta"):
            p.data[...] = 0.1 * rng.standard_normal(p.shape)


def _op_cases(rng) -> list:
    """(label, fn, inputs) for every differentiable primitive, five shapes each."""
    cases = []
    shapes = [(1, 2, 5, 5), (2, 4, 6, 6), (1, 3, 7, 4), (2, 2, 4, 8), (1, 6, 5, 6)]
    for k, (B, C, H, W) in enumerate(shapes):
        stride, pad = 1 + k % 2, k % 2
        groups = 2 if C % 2 == 0 and k % 2 else 1
        x = _t(rng, B, C, H, W)
        w = _t(rng, 2 * groups, C // groups, 3, 3)
        b = _t(rng, 2 * groups)
        cases.append((f"conv2d{(B, C, H, W)}", lambda x, w, b, s=stride, p=pad, g=groups: F.conv2d(x, w, b, s, p, g), [x, w, b]))
        dw = _t(rng, C, 1, 3, 1 + 2 * (k % 2))
        cases.append((f"depthwise{(B, C, H, W)}", lambda x, w, p=(1, k % 2): F.depthwise_conv2d(x, w, None, 1, p), [_t(rng, B, C, H, W), dw]))
        gam, bet = _t(rng, C), _t(rng, C)

        def bn(x, g, b, C=C):
            return F.batchnorm2d(x, g, b, np.zeros(C), np.ones(C), training=True)

        cases.append((f"batchnorm{(B, C, H, W)}", bn, [_t(rng, B, C, H, W), gam, bet]))
        cases.append((f"relu{(B, C, H, W)}", F.relu, [_t(rng, B, C, H, W)]))
        cases.append((f"sigmoid{(B, C, H, W)}", F.sigmoid, [_t(rng, B, C, H, W)]))
        cases.append((f"softmax{(B, C, H, W)}", lambda x: F.softmax(x, axis=1), [_t(rng, B, C, H, W)]))
        cases.append((f"log_softmax{(B, C, H, W)}", lambda x: F.log_softmax(x, axis=1), [_t(rng, B, C, H, W)]))
        cases.append((f"maxpool{(B, C, H, W)}", lambda x: F.pool2d("max", x, 3, 1, 1), [_t(rng, B, C, H, W)]))
        cases.append((f"avgpool{(B, C, H, W)}", lambda x, k=k: F.pool2d("avg", x, 3, 1 + k % 2, 1), [_t(rng, B, C, H, W)]))
        cases.append((f"fc{(B, C)}", F.fully_connected, [_t(rng, B, H, C), _t(rng, W, C), _t(rng, W)]))
        cases.append(
            (f"split_concat{(B, C, H, W)}", lambda x, C=C: concat(split(x, C, axis=1)[::-1], axis=1) * 1.5, [_t(rng, B, C, H, W)])
        )
        cases.append((f"broadcast_mul{(B, C, H, W)}", lambda a, b: a * b, [_t(rng, B, C, H, W), _t(rng, 1, C, 1, 1)]))
        cases.append((f"bilinear{(B, C, H, W)}", lambda x, k=k: F.bilinear_upsample(x, 1 + (k % 3)), [_t(rng, B, C, H, W)]))
        cases.append((f"matmul{(H, W)}", lambda a, b: a @ b, [_t(rng, B, H, W), _t(rng, W, C)]))
        cases.append((f"max_reduce{(B, C, H, W)}", lambda x: x.max(axis=(2, 3)), [_t(rng, B, C, H, W)]))
    return cases


def check_ops(eps: float = 1e-5, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    out = {}
    for label, fn, inputs in _op_cases(rng):
        out[label] = gradcheck(fn, inputs, eps).max_rel_err
    return out


def check_strip(eps: float = 1e-5, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    out = {}
    for d in DIRECTIONS:
        x, w, b = _t(rng, 1, 4, 9, 9), _t(rng, 4, 9), _t(rng, 4)
        out[f"strip_conv/{d.tag}"] = gradcheck(lambda x, w, b, d=d: strip_conv(x, w, d, b), [x, w, b], eps).max_rel_err
    return out


def _module_check(module, fn: Callable, extra_inputs, eps: float, max_checks: int, seed: int) -> float:
    named = list(module.named_parameters())
    inputs = list(extra_inputs) + [p for _, p in named]
    names = [f"x{i}" for i in range(len(extra_inputs))] + [n for n, _ in named]
    rep = gradcheck(lambda *args: fn(*args[: len(extra_inputs)]), inputs, eps, names=names, max_checks=max_checks, seed=seed)
    return rep.max_rel_err


def check_mda(eps: float = 1e-5, seed: int = 0, max_checks: int = 12) -> dict:
    rng = np.random.default_rng(seed)
    out = {}
    for variant in ("full", "dual", "pconv"):
        m = MDA(8, variant, rng=rng, dtype="f64")
        _randomize_bn(m, rng)
        m.eval()
        x = _t(rng, 1, 8, 8, 8)
        out[f"mda/{variant}"] = _module_check(m, m, [x], eps, max_checks, seed)
    return out


def check_mgc(eps: float = 1e-5, seed: int = 0, max_checks: int = 16) -> dict:
    rng = np.random.default_rng(seed)
    m = MGC(8, window=4, capacity=4, rng=rng, dtype="f64")
    x = _t(rng, 1, 8, 8, 8)
    return {"mgc": _module_check(m, m, [x], eps, max_checks, seed)}


def check_afd(eps: float = 1e-5, seed: int = 0, max_checks: int = 8) -> dict:
    rng = np.random.default_rng(seed)
    m = AFD([8, 8, 8, 8], width=8, num_classes=3, rng=rng, dtype="f64")
    feats = [_t(rng, 1, 8, 8 // s, 8 // s) for s in (1, 2, 4, 8)]
    return {"afd": _module_check(m, lambda *f: m(list(f)), feats, eps, max_checks, seed)}


def tiny_network_config(**overrides) -> PdcNetConfig:
    cfg = PdcNetConfig(
        encoder=EncoderConfig(channels=[8, 8, 8, 8], blocks=2),
        input_size=32,
        mgc_window=2,
        mgc_capacity=2,
        afd_width=8,
        dtype="f64",
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


def check_network(eps: float = 1e-5, seed: int = 0, n_params: int = 10) -> dict:
    """End-to-end check on 10 scalar parameters drawn across the whole model."""
    rng = np.random.default_rng(seed)
    net = PdcNet(tiny_network_config(seed=seed))
    _randomize_bn(net, rng)
    net.eval()
    x = Tensor(rng.uniform(0, 1, (1, 1, 32, 32)))
    named = list(net.named_parameters())
    pick = rng.choice(len(named), size=n_params, replace=False)
    chosen = [named[i] for i in sorted(pick)]
    rep = gradcheck(lambda *_: net(x), [p for _, p in chosen], eps, names=[n for n, _ in chosen], max_checks=1, seed=seed)
    return {"network": rep.max_rel_err}


SUITES = {
    "ops": check_ops,
    "strip": check_strip,
    "mda": check_mda,
    "mgc": check_mgc,
    "afd": check_afd,
    "network": check_network,
}


def tolerance(label: str) -> float:
    return NETWORK_TOL if label == "network" else MODULE_TOL


def run_suite(module: str = "all", eps: float = 1e-5) -> dict:
    names = list(SUITES) if module == "all" else [module]
    out = {}
    for n in names:
        out.update(SUITES[n](eps=eps))
    return out
