"""Tensor type, differentiable primitives and gradient checking."""

from . import functional
from .functional import (
    activation,
    batchnorm2d,
    bilinear_upsample,
    conv2d,
    depthwise_conv2d,
    fully_connected,
    global_avg_pool,
    log_softmax,
    pool2d,
    relu,
    sigmoid,
    softmax,
)
from .gradcheck import GradcheckReport, gradcheck, rel_err
from .nn import BatchNorm2d, Conv2d, ConvBNReLU, Linear, Module, count_parameters, parameter
from .tensor import Node, Tensor, as_tensor, concat, matmul, no_grad, pad, split

__all__ = [
    "functional",
    "activation",
    "batchnorm2d",
    "bilinear_upsample",
    "conv2d",
    "depthwise_conv2d",
    "fully_connected",
    "global_avg_pool",
    "log_softmax",
    "pool2d",
    "relu",
    "sigmoid",
    "softmax",
    "GradcheckReport",
    "gradcheck",
    "rel_err",
    "BatchNorm2d",
    "Conv2d",
    "ConvBNReLU",
    "Linear",
    "Module",
    "count_parameters",
    "parameter",
    "Node",
    "Tensor",
    "as_tensor",
    "concat",
    "matmul",
    "no_grad",
    "pad",
    "split",
]
