import numpy as np
import pytest

from pdcnet.autodiff import Tensor
from pdcnet.autodiff import functional as F
from pdcnet.errors import DimensionError


def t64(a, grad=False):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=grad)


def conv_oracle(x, w, b, stride, pad, groups):
    B, C, H, W = x.shape
    O, Cg, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    Ho = (H + 2 * pad - kh) // stride + 1
    Wo = (W + 2 * pad - kw) // stride + 1
    out = np.zeros((B, O, Ho, Wo))
    og = O // groups
    for n in range(B):
        for o in range(O):
            g = o // og
            for i in range(Ho):
                for j in range(Wo):
                    s = 0.0 if b is None else b[o]
                    for c in range(Cg):
                        for u in range(kh):
                            for v in range(kw):
                                s += w[o, c, u, v] * xp[n, g * Cg + c, i * stride + u, j * stride + v]
                    out[n, o, i, j] = s
    return out


def test_conv_scaling_example():
    x = t64([[[[1, 2], [3, 4]]]])
    out = F.conv2d(x, t64([[[[2.0]]]]))
    assert out.data[0, 0].tolist() == [[2, 4], [6, 8]]


def test_conv_counts_valid_taps():
    out = F.conv2d(t64(np.ones((1, 1, 3, 3))), t64(np.ones((1, 1, 3, 3))), padding=1).data[0, 0]
    assert out[1, 1] == 9 and out[0, 0] == 4


@pytest.mark.parametrize("stride,pad,groups", [(1, 1, 1), (2, 0, 1), (1, 1, 2), (2, 1, 4)])
def test_conv_matches_loop_oracle(rng, stride, pad, groups):
    x = rng.standard_normal((2, 4, 6, 6))
    w = rng.standard_normal((8, 4 // groups, 3, 3))
    b = rng.standard_normal(8)
    out = F.conv2d(t64(x), t64(w), t64(b), stride, pad, groups)
    np.testing.assert_allclose(out.data, conv_oracle(x, w, b, stride, pad, groups), rtol=0, atol=1e-12)


def test_conv_methods_agree(rng):
    x = t64(rng.standard_normal((2, 6, 7, 5)))
    w = t64(rng.standard_normal((6, 1, 3, 5)))
    a = F.conv2d(x, w, None, 1, (1, 2), groups=6, method="im2col").data
    b = F.conv2d(x, w, None, 1, (1, 2), groups=6, method="direct").data
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_conv_channel_mismatch():
    with pytest.raises(DimensionError):
        F.conv2d(t64(np.ones((1, 3, 4, 4))), t64(np.ones((2, 2, 3, 3))))


def test_depthwise_identity_and_per_channel_scale(rng):
    x = rng.standard_normal((1, 2, 5, 5))
    np.testing.assert_array_equal(F.depthwise_conv2d(t64(x), t64(np.ones((2, 1, 1, 1)))).data, x)
    out = F.depthwise_conv2d(t64(x), t64(np.array([1.0, 2.0]).reshape(2, 1, 1, 1))).data
    np.testing.assert_array_equal(out[0, 0], x[0, 0])
    np.testing.assert_array_equal(out[0, 1], 2 * x[0, 1])


def test_depthwise_equals_grouped_conv(rng):
    x = rng.standard_normal((2, 3, 8, 8))
    w = rng.standard_normal((3, 1, 3, 3))
    dw = F.depthwise_conv2d(t64(x), t64(w), None, 1, 1).data
    np.testing.assert_allclose(dw, conv_oracle(x, w, None, 1, 1, 3), rtol=0, atol=1e-12)


def test_batchnorm_train_two_values():
    x = np.array([-1.0, 1.0]).reshape(2, 1, 1, 1)
    out = F.batchnorm2d(t64(x), t64([1.0]), t64([0.0]), np.zeros(1), np.ones(1), training=True)
    expect = np.array([-1.0, 1.0]) / np.sqrt(1 + 1e-5)
    np.testing.assert_allclose(out.data.ravel(), expect, rtol=1e-15)


def test_batchnorm_eval_identity_stats(rng):
    x = rng.standard_normal((2, 3, 4, 4))
    out = F.batchnorm2d(t64(x), t64(np.ones(3)), t64(np.zeros(3)), np.zeros(3), np.ones(3), training=False)
    np.testing.assert_allclose(out.data, x / np.sqrt(1 + 1e-5), rtol=1e-15)


def test_batchnorm_running_stats_update(rng):
    x = rng.standard_normal((4, 2, 3, 3))
    rm, rv = np.zeros(2), np.ones(2)
    F.batchnorm2d(t64(x), t64(np.ones(2)), t64(np.zeros(2)), rm, rv, training=True)
    np.testing.assert_allclose(rm, 0.1 * x.mean(axis=(0, 2, 3)))
    np.testing.assert_allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 2, 3), ddof=1))


def test_batchnorm_single_value_in_train_mode():
    with pytest.raises(DimensionError):
        F.batchnorm2d(t64(np.ones((1, 2, 1, 1))), t64(np.ones(2)), t64(np.zeros(2)), np.zeros(2), np.ones(2), True)


def test_activation_examples():
    assert F.relu(t64([-2.0, 0.0, 3.0])).data.tolist() == [0, 0, 3]
    assert F.sigmoid(t64([0.0])).data[0] == 0.5
    assert F.softmax(t64([0.0, 0.0])).data.tolist() == [0.5, 0.5]


def test_softmax_is_shift_stable():
    out = F.softmax(t64([1000.0, 1000.0, -1000.0])).data
    np.testing.assert_allclose(out, [0.5, 0.5, 0.0])
    assert np.isfinite(F.log_softmax(t64([1000.0, -1000.0])).data).all()


def test_unknown_activation():
    with pytest.raises(ValueError):
        F.activation("gelu", t64([1.0]))


def test_pool_examples():
    x = t64([[[[1, 2], [3, 4]]]])
    assert F.pool2d("max", x, 3, 1, 1).data[0, 0].tolist() == [[4, 4], [4, 4]]
    assert F.pool2d("avg", x, 2).data.item() == 2.5
    assert F.global_avg_pool(x).data.item() == 2.5


def test_avg_pool_excludes_padding():
    out = F.pool2d("avg", t64(np.ones((1, 1, 3, 3))), 3, 1, 1)
    np.testing.assert_array_equal(out.data, np.ones((1, 1, 3, 3)))


def test_fully_connected_examples(rng):
    x = rng.standard_normal((3, 4))
    out = F.fully_connected(t64(x), t64(np.eye(4)), t64(np.zeros(4)))
    np.testing.assert_array_equal(out.data, x)
    assert F.fully_connected(t64([[3.0, 4.0]]), t64([[1.0, 1.0]])).data.tolist() == [[7.0]]


def test_fully_connected_matches_dot_oracle(rng):
    x, w, b = rng.standard_normal((5, 6)), rng.standard_normal((3, 6)), rng.standard_normal(3)
    oracle = np.array([[sum(x[i, k] * w[j, k] for k in range(6)) + b[j] for j in range(3)] for i in range(5)])
    np.testing.assert_allclose(F.fully_connected(t64(x), t64(w), t64(b)).data, oracle, rtol=0, atol=1e-12)


def test_bilinear_examples(rng):
    x = rng.standard_normal((1, 2, 3, 3))
    np.testing.assert_array_equal(F.bilinear_upsample(t64(x), 1).data, x)
    for s in (2, 4, 8):
        np.testing.assert_allclose(F.bilinear_upsample(t64(np.full((1, 1, 3, 2), 0.7)), s).data, 0.7)
    out = F.bilinear_upsample(t64([[[[0.0, 1.0], [0.0, 1.0]]]]), 2).data[0, 0]
    for row in out:
        np.testing.assert_allclose(row, [0, 0.25, 0.75, 1])


def test_maxpool_gradient_vs_differences(rng):
    x0 = rng.permutation(36).reshape(1, 1, 6, 6).astype(np.float64)  # distinct values, no ties
    x = t64(x0, grad=True)
    F.pool2d("max", x, 3, 2, 1).sum().backward()
    num = np.zeros_like(x0)
    for idx in np.ndindex(x0.shape):
        e = np.zeros_like(x0)
        e[idx] = 1e-3
        num[idx] = (F.pool2d("max", t64(x0 + e), 3, 2, 1).data.sum() - F.pool2d("max", t64(x0 - e), 3, 2, 1).data.sum()) / 2e-3
    np.testing.assert_allclose(x.grad, num, rtol=1e-4, atol=1e-9)
