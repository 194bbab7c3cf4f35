import numpy as np
import pytest

from pdcnet.autodiff import Tensor
from pdcnet.autodiff import functional as F
from pdcnet.errors import ConfigError, DimensionError
from pdcnet.strip import DIRECTIONS, StripConv, StripDirection, strip_conv, strip_conv_oracle


def run(x, w, d, b=None):
    return strip_conv(Tensor(x), Tensor(w), d, None if b is None else Tensor(b)).data


@pytest.mark.parametrize("d", DIRECTIONS, ids=lambda d: d.tag)
def test_delta_kernel_is_identity(rng, d):
    x = rng.standard_normal((1, 3, 6, 7))
    w = np.zeros((3, 9))
    w[:, 4] = 1.0
    np.testing.assert_array_equal(run(x, w, d), x)


def test_all_ones_counts():
    x, w = np.ones((1, 1, 5, 5)), np.ones((1, 9))
    diag = run(x, w, "main_diagonal")[0, 0]
    assert (diag[2, 2], diag[0, 0], diag[0, 4]) == (5, 5, 1)
    np.testing.assert_array_equal(run(x, w, "horizontal"), 5.0)


def test_anti_diagonal_line():
    x = np.zeros((1, 1, 9, 9))
    x[0, 0, 3, 3] = 1.0
    out = run(x, np.ones((1, 9)), StripDirection.ANTI_DIAGONAL)[0, 0]
    expect = np.zeros((9, 9))
    for t in range(-4, 5):
        r, c = 3 - t, 3 + t
        if 0 <= r < 9 and 0 <= c < 9:
            expect[r, c] = 1.0
    np.testing.assert_array_equal(out, expect)


@pytest.mark.parametrize("d", DIRECTIONS, ids=lambda d: d.tag)
def test_matches_loop_oracle(rng, d):
    x, w, b = rng.standard_normal((2, 4, 7, 7)), rng.standard_normal((4, 9)), rng.standard_normal(4)
    np.testing.assert_allclose(run(x, w, d, b), strip_conv_oracle(x, w, d, b), rtol=0, atol=1e-12)


def test_horizontal_equals_row_depthwise(rng):
    x, w = rng.standard_normal((2, 3, 8, 8)), rng.standard_normal((3, 9))
    dense = F.depthwise_conv2d(Tensor(x), Tensor(w.reshape(3, 1, 1, 9)), None, 1, (0, 4)).data
    np.testing.assert_allclose(run(x, w, "horizontal"), dense, rtol=0, atol=1e-12)


def test_transpose_swaps_horizontal_and_vertical(rng):
    x, w = rng.standard_normal((1, 2, 6, 9)), rng.standard_normal((2, 9))
    xt = x.transpose(0, 1, 3, 2)
    np.testing.assert_allclose(run(xt, w, "vertical"), run(x, w, "horizontal").transpose(0, 1, 3, 2), atol=1e-12)
    np.testing.assert_allclose(run(xt, w, "main_diagonal"), run(x, w, "main_diagonal").transpose(0, 1, 3, 2), atol=1e-12)


def test_column_flip_swaps_diagonals(rng):
    x, w = rng.standard_normal((1, 2, 7, 7)), rng.standard_normal((2, 9))
    flipped = x[..., ::-1]
    np.testing.assert_allclose(
        run(flipped, w[:, ::-1].copy(), "anti_diagonal")[..., ::-1], run(x, w, "main_diagonal"), atol=1e-12
    )


def test_gradients_match_oracle_adjoint(rng):
    """<strip(x), g> == <x, strip^T(g)>: the input gradient is the adjoint map."""
    x = Tensor(rng.standard_normal((1, 2, 6, 6)), requires_grad=True)
    w = rng.standard_normal((2, 9))
    g = rng.standard_normal((1, 2, 6, 6))
    for d in DIRECTIONS:
        x.grad = None
        (strip_conv(x, Tensor(w), d) * Tensor(g)).sum().backward()
        num = np.zeros(x.shape)
        for idx in np.ndindex(x.shape):
            e = np.zeros(x.shape)
            e[idx] = 1.0
            num[idx] = (strip_conv_oracle(e, w, d) * g).sum()
        np.testing.assert_allclose(x.grad, num, atol=1e-12)


def test_kernel_channel_mismatch():
    with pytest.raises(DimensionError, match="channel"):
        strip_conv(Tensor(np.ones((1, 3, 4, 4))), Tensor(np.ones((2, 9))), "vertical")


def test_direction_parse():
    assert StripDirection.parse("anti_diagonal") is StripDirection.ANTI_DIAGONAL
    assert [d.step for d in DIRECTIONS] == [(0, 1), (1, 0), (1, 1), (-1, 1)]
    with pytest.raises(ConfigError, match="sideways"):
        StripDirection.parse("sideways")


def test_module_shape(rng):
    m = StripConv(4, "vertical", rng=rng)
    assert m(Tensor(np.ones((2, 4, 5, 5), dtype=np.float32))).shape == (2, 4, 5, 5)
