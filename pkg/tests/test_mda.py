import numpy as np
import pytest

from pdcnet.autodiff import Tensor
from pdcnet.autodiff import functional as F
from pdcnet.errors import ConfigError
from pdcnet.mda import MDA, VARIANTS


def identity_mda(channels, variant):
    m = MDA(channels, variant, dtype="f64")
    m.entry.weight.data[...] = 1.0
    m.entry.bias.data[...] = 0.0
    for s in m.strips:
        s.weight.data[...] = 0.0
        s.weight.data[:, s.kernel_len // 2] = 1.0
        s.bias.data[...] = 0.0
    m.exit.weight.data[...] = np.eye(channels).reshape(channels, channels, 1, 1)
    m.exit.bias.data[...] = 0.0
    m.bn.running_mean[...] = 0.0
    m.bn.running_var[...] = 1.0 - m.bn.eps  # so the eval-mode scale is exactly 1
    return m.eval()


@pytest.mark.parametrize("variant", VARIANTS)
def test_identity_configuration_on_ones(variant):
    m = identity_mda(8, variant)
    out = m(Tensor(np.ones((1, 8, 6, 6))))
    np.testing.assert_allclose(out.data, 1.0, rtol=1e-15)


@pytest.mark.parametrize("variant", VARIANTS)
def test_zero_input_zero_output_without_bias(variant, rng):
    m = MDA(8, variant, rng=rng, dtype="f64").eval()
    m.entry.bias.data[...] = 0.0
    m.exit.bias.data[...] = 0.0
    for s in m.strips:
        s.bias.data[...] = 0.0
    m.bn.beta.data[...] = 0.0
    m.bn.running_mean[...] = 0.0
    np.testing.assert_array_equal(m(Tensor(np.zeros((2, 8, 5, 5)))).data, 0.0)


def test_pconv_matches_hand_pipeline(rng):
    m = MDA(6, "pconv", rng=rng, dtype="f64")
    x = Tensor(rng.standard_normal((2, 6, 7, 7)))
    out = m(x).data
    h = F.depthwise_conv2d(x, m.entry.weight, m.entry.bias)
    h = F.batchnorm2d(h, m.bn.gamma, m.bn.beta, np.zeros(6), np.ones(6), training=True)
    h = F.relu(h) * F.pool2d("max", x, 3, 1, 1)
    expect = F.conv2d(h, m.exit.weight, m.exit.bias).data
    np.testing.assert_allclose(out, expect, rtol=0, atol=1e-12)


def test_full_variant_routes_one_quarter_per_direction(rng):
    """Perturbing input channel c only changes strip features in its own quarter."""
    m = MDA(8, "full", rng=rng, dtype="f64")
    x = rng.standard_normal((1, 8, 9, 9))
    base = m.strip_features(Tensor(x)).data
    x2 = x.copy()
    x2[0, 5] += 1.0
    diff = np.abs(m.strip_features(Tensor(x2)).data - base).sum(axis=(0, 2, 3))
    assert np.all(diff[[0, 1, 2, 3, 6, 7]] == 0) and diff[5] > 0


def test_shape_preserved(rng):
    m = MDA(16, "dual", rng=rng)
    assert m(Tensor(np.ones((2, 16, 8, 8), dtype=np.float32))).shape == (2, 16, 8, 8)


def test_bad_variant_and_channels():
    with pytest.raises(ConfigError):
        MDA(8, "triple")
    with pytest.raises(ConfigError):
        MDA(6, "full")
