import numpy as np
import pytest

from pdcnet.autodiff import Tensor, concat, no_grad, split
from pdcnet.errors import DimensionError


def leaf(a):
    return Tensor(np.asarray(a, dtype=np.float64), requires_grad=True)


def test_square_gradient():
    x = leaf([3.0])
    (x * x).sum().backward()
    assert x.grad.tolist() == [6.0]


def test_reused_input_accumulates():
    x = leaf(np.ones((2, 3)))
    (x + x).sum().backward()
    np.testing.assert_array_equal(x.grad, np.full((2, 3), 2.0))


def test_diamond_graph_visits_each_node_once():
    x = leaf([2.0])
    y = x * 3.0
    z = y * y + y  # dz/dx = (2y + 1) * 3
    z.sum().backward()
    assert x.grad[0] == pytest.approx((2 * 6 + 1) * 3)


def test_backward_requires_scalar():
    with pytest.raises(DimensionError, match="scalar"):
        leaf([1.0, 2.0]).backward()


def test_gradients_accumulate_across_backward_calls():
    x = leaf([1.0, 2.0])
    (x * 2.0).sum().backward()
    (x * 2.0).sum().backward()
    np.testing.assert_array_equal(x.grad, [4.0, 4.0])
    x.zero_grad()
    assert x.grad is None


def test_broadcast_mul_examples():
    out = Tensor(np.array([1.0, 2.0])) * Tensor(np.array([3.0, 4.0]))
    assert out.data.tolist() == [3.0, 8.0]
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal((Tensor(a) * 2.0).data, 2 * a)


def test_broadcast_gradient_sums_over_expanded_axes(rng):
    a = leaf(rng.standard_normal((2, 3, 4)))
    b = leaf(rng.standard_normal((1, 3, 1)))
    (a * b).sum().backward()
    np.testing.assert_allclose(b.grad, a.data.sum(axis=(0, 2), keepdims=True), rtol=1e-12)
    np.testing.assert_allclose(a.grad, np.broadcast_to(b.data, a.shape), rtol=1e-12)


def test_incompatible_broadcast_raises():
    with pytest.raises(DimensionError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((4, 3)))


def test_split_and_concat():
    x = Tensor(np.arange(8 * 3, dtype=np.float64).reshape(1, 8, 3, 1))
    parts = split(x, 4, axis=1)
    assert [p.shape for p in parts] == [(1, 2, 3, 1)] * 4
    np.testing.assert_array_equal(concat(parts, axis=1).data, x.data)


def test_split_uneven_names_axis():
    with pytest.raises(DimensionError, match="axis 1"):
        split(Tensor(np.ones((1, 6, 2, 2))), 4, axis=1)


def test_concat_gradient_is_ones_into_each_input(rng):
    xs = [leaf(rng.standard_normal((2, k, 3))) for k in (1, 2, 3)]
    concat(xs, axis=1).sum().backward()
    for x in xs:
        np.testing.assert_array_equal(x.grad, np.ones_like(x.data))


def test_concat_shape_mismatch():
    with pytest.raises(DimensionError):
        concat([Tensor(np.ones((1, 2, 3))), Tensor(np.ones((1, 2, 4)))], axis=1)


def test_reduce_max_gradient_goes_to_first_tie():
    x = leaf([[1.0, 5.0, 5.0]])
    x.max(axis=1).sum().backward()
    assert x.grad.tolist() == [[0.0, 1.0, 0.0]]


def test_no_grad_builds_no_graph():
    x = leaf([1.0])
    with no_grad():
        y = x * 2.0
    assert y.node is None and not y.requires_grad


def test_gradient_is_linear_in_the_loss(rng):
    """grad(a*f + b*g) == a*grad(f) + b*grad(g)."""
    x0 = rng.standard_normal((3, 4))
    w = rng.standard_normal((4, 2))

    def grads(a, b):
        x = leaf(x0)
        h = x @ Tensor(w)
        loss = (h * h).sum() * a + (h.exp()).sum() * b
        loss.backward()
        return x.grad

    combo = grads(0.7, -1.3)
    parts = 0.7 * grads(1.0, 0.0) - 1.3 * grads(0.0, 1.0)
    np.testing.assert_allclose(combo, parts, rtol=1e-10, atol=1e-10)


def test_backward_is_deterministic(rng):
    x0 = rng.standard_normal((5, 5))

    def run():
        x = leaf(x0)
        ((x @ x) * 0.1).exp().mean().backward()
        return x.grad

    np.testing.assert_array_equal(run(), run())


def test_full_reductions_are_zero_dimensional():
    x = leaf(np.arange(6.0).reshape(2, 3))
    for out in (x.sum(), x.mean(), x.max(), x[1, 2], x.sum() * 2.0, 1.0 - x.mean()):
        assert out.shape == ()
    x.max().backward()
    assert x.grad[1, 2] == 1.0 and x.grad.sum() == 1.0
