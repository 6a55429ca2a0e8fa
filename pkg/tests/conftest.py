import os

import numpy as np
import pytest

from TrustQN.idx import IdxDataset, write_idx

MNIST_DIR_ENV = "TRUSTQN_MNIST_DIR"


@pytest.fixture
def rng():
    return np.random.default_rng(20240131)


@pytest.fixture
def mnist_dir():
    path = os.environ.get(MNIST_DIR_ENV)
    if not path:
        pytest.skip(f"{MNIST_DIR_ENV} is not set")
    return path


@pytest.fixture
def tiny_idx(tmp_path):
    """Two 2x2 images with labels 3 and 7, written as plain IDX files."""
    pixels = np.array([[[0, 255], [128, 1]], [[10, 20], [30, 40]]], dtype=np.uint8)
    dataset = IdxDataset(pixels, np.array([3, 7]))
    image_path = str(tmp_path / "images-idx3-ubyte")
    label_path = str(tmp_path / "labels-idx1-ubyte")
    write_idx(dataset, image_path, label_path)
    return image_path, label_path


@pytest.fixture
def synthetic_idx(tmp_path):
    """A small learnable 4x4 digit set: the label decides which quadrant is bright."""
    generator = np.random.default_rng(7)
    count = 200
    labels = generator.integers(0, 4, count)
    pixels = generator.integers(0, 40, (count, 4, 4)).astype(np.uint8)
    for index, label in enumerate(labels):
        row, col = divmod(int(label), 2)
        pixels[index, 2 * row:2 * row + 2, 2 * col:2 * col + 2] = 220
    dataset = IdxDataset(pixels, labels.astype(np.int64), num_classes=10)
    image_path = str(tmp_path / "train-images-idx3-ubyte.gz")
    label_path = str(tmp_path / "train-labels-idx1-ubyte.gz")
    write_idx(dataset, image_path, label_path)
    return image_path, label_path
