import numpy as np
import pytest

from pdcnet.synth import SynthConfig, write_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """16 train / 8 test images at 64x64, shared across tests."""
    root = tmp_path_factory.mktemp("data")
    write_dataset(root, SynthConfig(size=64, n_images=16, seed=3), n_test=8)
    return root
