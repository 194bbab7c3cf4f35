import itertools

import numpy as np
import pytest

from pdcnet.autodiff import Tensor
from pdcnet.errors import ConfigError
from pdcnet.mgc import MGC, memory_read, window_partition, window_reverse


def test_partition_four_by_four():
    x = np.arange(16.0).reshape(1, 1, 4, 4)
    p = window_partition(Tensor(x), 2).data
    assert p.shape == (4, 1, 2, 2)
    np.testing.assert_array_equal(p[0, 0], x[0, 0, :2, :2])
    np.testing.assert_array_equal(p[1, 0], x[0, 0, :2, 2:])


def test_partition_round_trip(rng):
    x = rng.standard_normal((2, 3, 8, 12))
    p = window_partition(Tensor(x), 4)
    np.testing.assert_array_equal(window_reverse(p, 2, 8, 12, 4).data, x)


def test_window_equal_to_map_is_single_patch(rng):
    x = rng.standard_normal((1, 5, 4, 4))
    p = window_partition(Tensor(x), 4).data
    np.testing.assert_array_equal(p, x)


def test_window_must_tile():
    with pytest.raises(ConfigError):
        window_partition(Tensor(np.ones((1, 1, 6, 6))), 4)


def test_descriptor_on_constant_patch(rng):
    m = MGC(3, window=2, rng=rng, dtype="f64")
    patches = Tensor(np.full((2, 3, 2, 2), 0.8))
    _, fw = m.descriptor(patches)
    np.testing.assert_allclose(fw.data, 0.8, rtol=1e-15)


@pytest.mark.parametrize("gate,reduce", [(1.0, "mean"), (0.0, "max")])
def test_descriptor_gate_limits(rng, gate, reduce):
    m = MGC(3, window=2, rng=rng, dtype="f64")
    m.force_descriptor_gate = gate
    patches = rng.standard_normal((4, 3, 2, 2))
    _, fw = m.descriptor(Tensor(patches))
    np.testing.assert_array_equal(fw.data, getattr(patches, reduce)(axis=(2, 3)))


def test_single_slot_read(rng):
    slot = rng.standard_normal((1, 6))
    fhat, w = memory_read(Tensor(rng.standard_normal((5, 6))), Tensor(slot))
    np.testing.assert_array_equal(w.data, 1.0)
    np.testing.assert_allclose(fhat.data, np.repeat(slot, 5, axis=0), rtol=1e-15)


def test_identical_slots_share_weight(rng):
    slot = rng.standard_normal((1, 6))
    _, w = memory_read(Tensor(rng.standard_normal((3, 6))), Tensor(np.vstack([slot, slot])))
    np.testing.assert_allclose(w.data, 0.5, rtol=1e-15)


def test_read_lies_in_slot_hull(rng):
    slots = rng.standard_normal((8, 16))
    fhat, w = memory_read(Tensor(rng.standard_normal((50, 16)) * 3), Tensor(slots))
    np.testing.assert_allclose(w.data.sum(axis=1), 1.0, atol=1e-12)
    assert (w.data >= 0).all()
    assert (fhat.data >= slots.min(axis=0) - 1e-12).all()
    assert (fhat.data <= slots.max(axis=0) + 1e-12).all()


def test_read_width_mismatch():
    with pytest.raises(ConfigError):
        memory_read(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))


@pytest.mark.parametrize("g", [1.0, 0.0])
def test_forced_gate(rng, g):
    m = MGC(4, window=2, capacity=3, rng=rng, dtype="f64")
    m.force_gate = g
    x = rng.standard_normal((2, 4, 4, 6))
    np.testing.assert_array_equal(m(Tensor(x)).data, g * x)


def test_output_bounded_by_input(rng):
    m = MGC(8, window=4, capacity=4, rng=rng, dtype="f64")
    x = rng.standard_normal((2, 8, 8, 8))
    assert (np.abs(m(Tensor(x)).data) <= np.abs(x)).all()


def test_slot_permutation_invariance(rng):
    m = MGC(6, window=2, capacity=4, rng=rng, dtype="f64")
    x = Tensor(rng.standard_normal((1, 6, 4, 4)))
    base = m(x).data
    slots = m.memory.slots.data.copy()
    for perm in itertools.islice(itertools.permutations(range(4)), 1, 6):
        m.memory.slots.data[...] = slots[list(perm)]
        np.testing.assert_allclose(m(x).data, base, rtol=0, atol=1e-12)


def test_slots_receive_gradient(rng):
    m = MGC(6, window=2, capacity=4, rng=rng, dtype="f64")
    m(Tensor(rng.standard_normal((1, 6, 4, 4)))).sum().backward()
    g = m.memory.slots.grad
    assert g is not None and np.isfinite(g).all() and np.abs(g).sum() > 0


def test_channel_mismatch(rng):
    with pytest.raises(ConfigError):
        MGC(4, window=2, rng=rng)(Tensor(np.ones((1, 3, 4, 4), dtype=np.float32)))
