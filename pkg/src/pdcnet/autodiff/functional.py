"""Differentiable neural-network primitives on NCHW feature maps."""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError
from .tensor import Tensor, as_tensor, make_result


def _pair(v) -> tuple:
    if isinstance(v, (int, np.integer)):
        return int(v), int(v)
    a, b = v
    return int(a), int(b)


def _out_size(n: int, pad: int, k: int, stride: int, axis: str) -> int:
    if n + 2 * pad < k:
        raise DimensionError(f"kernel {k} larger than padded {axis} extent {n + 2 * pad}")
    return (n + 2 * pad - k) // stride + 1


def _windows(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int, ho: int, wo: int) -> np.ndarray:
    """View (B,C,Ho,Wo,kh,kw) of every kernel window of a padded map."""
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, : (ho - 1) * sh + 1 : sh, : (wo - 1) * sw + 1 : sw]


def _col2im(gwin: np.ndarray, padded_shape: tuple, sh: int, sw: int) -> np.ndarray:
    """Scatter-add window gradients (B,C,kh,kw,Ho,Wo) back onto the padded map."""
    _, _, kh, kw, ho, wo = gwin.shape
    gxp = np.zeros(padded_shape, dtype=gwin.dtype)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i : i + (ho - 1) * sh + 1 : sh, j : j + (wo - 1) * sw + 1 : sw] += gwin[:, :, i, j]
    return gxp


# -- convolution -----------------------------------------------------------

def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride=1,
    padding=0,
    groups: int = 1,
    method: str = "auto",
) -> Tensor:
    """Zero-padded 2-D cross-correlation with grouped channels.

    ``padding`` is an int or an (h, w) pair applied symmetrically per axis.
    ``method`` selects the kernel: "im2col" (one GEMM per group), "direct"
    (tap-by-tap accumulation, one filter per channel only) or "auto", which
    picks direct whenever every group maps one channel to one channel.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4:
        raise DimensionError(f"conv2d input must be 4-D (B,C,H,W), got axis count {x.ndim}")
    if weight.ndim != 4:
        raise DimensionError(f"conv2d weight must be 4-D (Cout,Cin/groups,kh,kw), got axis count {weight.ndim}")
    B, C, H, W = x.shape
    cout, cg, kh, kw = weight.shape
    if C % groups or cout % groups:
        raise DimensionError(f"channel axis 1: Cin={C} and Cout={cout} must both be divisible by groups={groups}")
    if cg * groups != C:
        raise DimensionError(f"channel axis 1: input has {C} channels, weight expects {cg * groups}")
    if bias is not None and bias.shape != (cout,):
        raise DimensionError(f"bias axis 0: expected {cout} entries, got shape {bias.shape}")
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    ho = _out_size(H, ph, kh, sh, "height")
    wo = _out_size(W, pw, kw, sw, "width")
    og = cout // groups

    if method == "direct" and not (cg == 1 and og == 1):
        raise ValueError("direct method needs one input and one output channel per group")
    if method == "direct" or (method == "auto" and cg == 1 and og == 1):
        return _depthwise(x, weight, bias, sh, sw, ph, pw, ho, wo)

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x.data
    win = _windows(xp, kh, kw, sh, sw, ho, wo)  # B,C,Ho,Wo,kh,kw
    K = cg * kh * kw
    cols = (
        win.reshape(B, groups, cg, ho, wo, kh, kw)
        .transpose(1, 2, 5, 6, 0, 3, 4)
        .reshape(groups, K, B * ho * wo)
    )
    wmat = weight.data.reshape(groups, og, K)
    out = np.matmul(wmat, cols)  # G,og,B*Ho*Wo
    out = out.reshape(groups, og, B, ho, wo).transpose(2, 0, 1, 3, 4).reshape(B, cout, ho, wo)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out)
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gm = g.reshape(B, groups, og, ho * wo).transpose(1, 2, 0, 3).reshape(groups, og, B * ho * wo)
        gw = np.matmul(gm, cols.transpose(0, 2, 1)).reshape(weight.shape) if weight.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = np.matmul(wmat.transpose(0, 2, 1), gm)  # G,K,B*Ho*Wo
            gwin = (
                gcols.reshape(groups, cg, kh, kw, B, ho, wo)
                .transpose(4, 0, 1, 2, 3, 5, 6)
                .reshape(B, C, kh, kw, ho, wo)
            )
            gxp = _col2im(gwin, xp.shape, sh, sw)
            gx = gxp[:, :, ph : ph + H, pw : pw + W]
        res = [gx, gw]
        if bias is not None:
            res.append(g.sum(axis=(0, 2, 3)))
        return res

    return make_result(out, inputs, "conv2d", backward)


def _depthwise(x, weight, bias, sh, sw, ph, pw, ho, wo) -> Tensor:
    # one filter per channel: accumulate shifted slices tap by tap
    B, C, H, W = x.shape
    _, _, kh, kw = weight.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x.data
    wd = weight.data[:, 0]
    out = np.zeros((B, C, ho, wo), dtype=np.result_type(x.data, wd))
    for i in range(kh):
        for j in range(kw):
            out += xp[:, :, i : i + (ho - 1) * sh + 1 : sh, j : j + (wo - 1) * sw + 1 : sw] * wd[:, i, j][None, :, None, None]
    if bias is not None:
        out += bias.data[None, :, None, None]
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gx = gw = None
        if weight.requires_grad:
            gw = np.empty_like(weight.data)
            for i in range(kh):
                for j in range(kw):
                    sl = xp[:, :, i : i + (ho - 1) * sh + 1 : sh, j : j + (wo - 1) * sw + 1 : sw]
                    gw[:, 0, i, j] = (g * sl).sum(axis=(0, 2, 3))
        if x.requires_grad:
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + (ho - 1) * sh + 1 : sh, j : j + (wo - 1) * sw + 1 : sw] += g * wd[:, i, j][None, :, None, None]
            gx = gxp[:, :, ph : ph + H, pw : pw + W]
        res = [gx, gw]
        if bias is not None:
            res.append(g.sum(axis=(0, 2, 3)))
        return res

    return make_result(out, inputs, "depthwise_conv2d", backward)


def depthwise_conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1, padding=0) -> Tensor:
    """conv2d with ``groups`` equal to the channel count."""
    C = as_tensor(x).shape[1]
    if weight.shape[0] != C or weight.shape[1] != 1:
        raise DimensionError(f"depthwise weight axis 0 must equal channel count {C} with axis 1 == 1, got {weight.shape}")
    return conv2d(x, weight, bias, stride, padding, groups=C)


# -- normalization ---------------------------------------------------------

def batchnorm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalization over (B, H, W).

    In training mode the running statistics are updated in place with the
    unbiased batch variance.
    """
    B, C, H, W = x.shape
    if gamma.shape != (C,) or running_mean.shape != (C,):
        raise DimensionError(f"batchnorm channel axis 1: input has {C} channels, state has {gamma.shape[0]}")
    gd = gamma.data[None, :, None, None]
    if training:
        n = B * H * W
        if n == 1:
            raise DimensionError("batchnorm in train mode needs more than one value per channel (B==1, H*W==1)")
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var * (n / (n - 1))
    else:
        n = None
        mean, var = running_mean.astype(x.data.dtype), running_var.astype(x.data.dtype)
    invstd = (1.0 / np.sqrt(var + eps)).astype(x.data.dtype)
    xhat = (x.data - mean[None, :, None, None]) * invstd[None, :, None, None]
    out = xhat * gd + beta.data[None, :, None, None]

    def backward(g):
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        gbeta = g.sum(axis=(0, 2, 3))
        dxhat = g * gd
        if training:
            s1 = dxhat.sum(axis=(0, 2, 3), keepdims=True)
            s2 = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
            gx = (invstd[None, :, None, None] / n) * (n * dxhat - s1 - xhat * s2)
        else:
            gx = dxhat * invstd[None, :, None, None]
        return gx, ggamma, gbeta

    return make_result(out, (x, gamma, beta), "batchnorm2d", backward)


# -- activations -----------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    xd = x.data
    mask = xd > 0
    return make_result(np.where(mask, xd, 0).astype(xd.dtype), (x,), "relu", lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    out = np.exp(-np.logaddexp(0, -xd)).astype(xd.dtype)
    return make_result(out, (x,), "sigmoid", lambda g: (g * out * (1 - out),))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    xd = x.data
    if not -xd.ndim <= axis < xd.ndim:
        raise DimensionError(f"softmax axis {axis} invalid for {xd.ndim}-D input")
    e = np.exp(xd - xd.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (x,), "softmax", backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    xd = x.data
    shifted = xd - xd.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return make_result(out, (x,), "log_softmax", backward)


def activation(kind: str, x: Tensor) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


# -- pooling ---------------------------------------------------------------

def pool2d(kind: str, x: Tensor, kernel, stride=None, padding=0) -> Tensor:
    """Max or average pooling.

    Max pooling pads with -inf and routes the gradient to the first maximal
    tap in row-major order. Average pooling divides by the number of
    non-padding taps in each window.
    """
    if kind not in ("max", "avg"):
        raise ValueError(f"unknown pool kind {kind!r}")
    B, C, H, W = x.shape
    kh, kw = _pair(kernel)
    sh, sw = _pair(stride if stride is not None else kernel)
    ph, pw = _pair(padding)
    ho = _out_size(H, ph, kh, sh, "height")
    wo = _out_size(W, pw, kw, sw, "width")
    taps = [(i, j) for i in range(kh) for j in range(kw)]

    def tap(arr, i, j):
        return arr[:, :, i : i + (ho - 1) * sh + 1 : sh, j : j + (wo - 1) * sw + 1 : sw]

    if kind == "max":
        fill = -np.inf
        xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)), constant_values=fill) if (ph or pw) else x.data
        out = tap(xp, 0, 0).copy()
        idx = np.zeros(out.shape, dtype=np.int64)
        for k, (i, j) in enumerate(taps[1:], start=1):
            v = tap(xp, i, j)
            better = v > out  # strict: earlier tap keeps ties
            out[better] = v[better]
            idx[better] = k

        def backward(g):
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for k, (i, j) in enumerate(taps):
                tap(gxp, i, j)[...] += np.where(idx == k, g, 0)
            return (gxp[:, :, ph : ph + H, pw : pw + W],)

        return make_result(out, (x,), "maxpool2d", backward)

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x.data
    ones = np.pad(np.ones((1, 1, H, W), dtype=x.data.dtype), ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    total = np.zeros((B, C, ho, wo), dtype=x.data.dtype)
    count = np.zeros((1, 1, ho, wo), dtype=x.data.dtype)
    for i, j in taps:
        total += tap(xp, i, j)
        count += tap(ones, i, j)
    out = total / count

    def backward(g):
        gk = g / count
        gxp = np.zeros(xp.shape, dtype=g.dtype)
        for i, j in taps:
            tap(gxp, i, j)[...] += gk
        return (gxp[:, :, ph : ph + H, pw : pw + W],)

    return make_result(out, (x,), "avgpool2d", backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the spatial axes: (B,C,H,W) -> (B,C)."""
    return x.mean(axis=(2, 3))


# -- dense -----------------------------------------------------------------

def fully_connected(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map on the last axis: ``x @ weight.T + bias``."""
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"fully_connected last axis {x.shape[-1]} does not match weight input dim {weight.shape[-1]}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    if bias is not None:
        out = out + bias.data
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gx = g @ wd if x.requires_grad else None
        gw = g.reshape(-1, g.shape[-1]).T @ xd.reshape(-1, xd.shape[-1]) if weight.requires_grad else None
        res = [gx, gw]
        if bias is not None:
            res.append(g.reshape(-1, g.shape[-1]).sum(axis=0))
        return res

    return make_result(out, inputs, "fully_connected", backward)


# -- resampling ------------------------------------------------------------

def _interp_matrix(n_in: int, scale: int, dtype) -> np.ndarray:
    n_out = n_in * scale
    A = np.zeros((n_out, n_in), dtype=dtype)
    for d in range(n_out):
        src = max((d + 0.5) / scale - 0.5, 0.0)
        i0 = min(int(math.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        lam = src - i0
        A[d, i0] += 1.0 - lam
        A[d, i1] += lam
    return A


def bilinear_upsample(x: Tensor, scale: int) -> Tensor:
    """Bilinear resize by an integer factor, half-pixel centres (align_corners=False)."""
    if int(scale) != scale or scale < 1:
        raise ValueError(f"scale must be a positive integer, got {scale}")
    scale = int(scale)
    if scale == 1:
        return x
    B, C, H, W = x.shape
    ah = _interp_matrix(H, scale, x.data.dtype)
    aw = _interp_matrix(W, scale, x.data.dtype)
    out = np.matmul(np.matmul(ah, x.data), aw.T)

    def backward(g):
        return (np.matmul(np.matmul(ah.T, g), aw),)

    return make_result(out, (x,), "bilinear_upsample", backward)


__all__ = [
    "conv2d",
    "depthwise_conv2d",
    "batchnorm2d",
    "relu",
    "sigmoid",
    "softmax",
    "log_softmax",
    "activation",
    "pool2d",
    "global_avg_pool",
    "fully_connected",
    "bilinear_upsample",
]
