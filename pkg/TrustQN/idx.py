"""
IDX image/label files as distributed for MNIST-style datasets.

    images: magic 0x00000803, count, rows, cols (big-endian uint32), then count*rows*cols pixel bytes
    labels: magic 0x00000801, count (big-endian uint32), then count label bytes

Files ending in `.gz` are read and written through gzip.
"""
import gzip
import logging
import os
import struct
from dataclasses import dataclass

import numpy as np

from TrustQN.exceptions import (BadMagicError, CountMismatchError, DatasetError,
                                DatasetMissingError, TruncatedFileError)

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class IdxDataset:
    pixels: np.ndarray
    labels: np.ndarray
    num_classes: int = 10

    @property
    def count(self):
        return self.pixels.shape[0]

    @property
    def rows(self):
        return self.pixels.shape[1]

    @property
    def cols(self):
        return self.pixels.shape[2]

    @property
    def images(self):
        """Pixels rescaled to [0, 1]."""
        return self.pixels.astype(np.float64) / 255.0

    @property
    def one_hot(self):
        targets = np.zeros((self.count, self.num_classes))
        targets[np.arange(self.count), self.labels] = 1.0
        return targets

    def flat_images(self):
        return self.images.reshape(self.count, -1)


def _open(path, mode):
    if str(path).endswith(".gz"):
        # fixed mtime keeps the compressed bytes reproducible
        return gzip.GzipFile(path, mode, mtime=0) if 'w' in mode else gzip.open(path, mode)
    return open(path, mode)


def _read_bytes(path):
    if not os.path.isfile(path):
        raise DatasetMissingError(f"Dataset file '{path}' does not exist.")
    try:
        with _open(path, "rb") as handle:
            return handle.read()
    except (OSError, EOFError) as e:
        raise TruncatedFileError(f"Cannot read '{path}': {e}")


def _header(data, path, magic, dims):
    size = 4 * (1 + dims)
    if len(data) < size:
        raise TruncatedFileError(f"'{path}' holds {len(data)} bytes, shorter than its {size}-byte header.")
    values = struct.unpack(">" + "I" * (1 + dims), data[:size])
    if values[0] != magic:
        raise BadMagicError(f"'{path}' has magic 0x{values[0]:08x}, expected 0x{magic:08x}.")
    return values[1:], size


def read_idx_header(path):
    """
    The function `read_idx_header` reports the magic number and dimensions of an IDX file.

    :param path: The `path` parameter is an image or label file
    :return: a tuple `(magic, dims)`.
    """
    data = _read_bytes(path)
    if len(data) < 4:
        raise TruncatedFileError(f"'{path}' is too short to hold a magic number.")
    magic = struct.unpack(">I", data[:4])[0]
    if magic == IMAGE_MAGIC:
        return magic, _header(data, path, IMAGE_MAGIC, 3)[0]
    if magic == LABEL_MAGIC:
        return magic, _header(data, path, LABEL_MAGIC, 1)[0]
    raise BadMagicError(f"'{path}' has unknown magic 0x{magic:08x}.")


def read_idx(image_path, label_path, limit=None, num_classes=10):
    """
    The function `read_idx` loads a pair of IDX image and label files.

    :param image_path: The `image_path` parameter is the image file
    :param label_path: The `label_path` parameter is the label file
    :param limit: The `limit` parameter keeps only the first `limit` samples (optional)
    :param num_classes: The `num_classes` parameter bounds the label values, defaults to 10 (optional)
    :return: an `IdxDataset`. Raises `DatasetMissingError`, `BadMagicError`, `TruncatedFileError` or
    `CountMismatchError`.
    """
    image_data = _read_bytes(image_path)
    label_data = _read_bytes(label_path)
    (count, rows, cols), image_offset = _header(image_data, image_path, IMAGE_MAGIC, 3)
    (label_count,), label_offset = _header(label_data, label_path, LABEL_MAGIC, 1)
    if count != label_count:
        raise CountMismatchError(f"{count} images in '{image_path}' but {label_count} labels in '{label_path}'.")

    kept = count if limit is None else min(count, int(limit))
    pixel_bytes = kept * rows * cols
    if len(image_data) < image_offset + count * rows * cols:
        raise TruncatedFileError(
            f"'{image_path}' declares {count} images of {rows}x{cols} but holds only "
            f"{len(image_data) - image_offset} pixel bytes.")
    if len(label_data) < label_offset + count:
        raise TruncatedFileError(
            f"'{label_path}' declares {count} labels but holds only {len(label_data) - label_offset}.")

    pixels = np.frombuffer(image_data, dtype=np.uint8, count=pixel_bytes, offset=image_offset)
    labels = np.frombuffer(label_data, dtype=np.uint8, count=kept, offset=label_offset)
    if labels.size and labels.max() >= num_classes:
        raise DatasetError(f"Label {labels.max()} in '{label_path}' is outside [0, {num_classes}).")
    logger.info("Read %d of %d samples (%dx%d) from %s", kept, count, rows, cols, image_path)
    return IdxDataset(pixels.reshape(kept, rows, cols).copy(), labels.astype(np.int64), num_classes)


def write_idx(dataset, image_path, label_path):
    """
    The function `write_idx` serializes a dataset back to IDX files, byte for byte as `read_idx`
    expects them.
    """
    with _open(image_path, "wb") as handle:
        handle.write(struct.pack(">IIII", IMAGE_MAGIC, dataset.count, dataset.rows, dataset.cols))
        handle.write(np.ascontiguousarray(dataset.pixels, dtype=np.uint8).tobytes())
    with _open(label_path, "wb") as handle:
        handle.write(struct.pack(">II", LABEL_MAGIC, dataset.count))
        handle.write(np.ascontiguousarray(dataset.labels, dtype=np.uint8).tobytes())
