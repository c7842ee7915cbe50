# Copyright 2026 The dabnet Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Reading and writing the IDX container.

Both files start with a big-endian 32-bit magic number followed by big-endian
32-bit dimensions and then raw unsigned bytes::

    images: 0x00000803, count, rows, columns, pixels...
    labels: 0x00000801, count, labels...

Paths ending in ``.gz`` are read and written through gzip.
"""

import gzip
import logging
import struct

import numpy as np

from dabnet.errors import FormatError
from .dataset import Dataset

logger = logging.getLogger('dabnet')

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _open(path, mode):
    if str(path).endswith('.gz'):
        return gzip.open(path, mode)
    return open(path, mode)


def _read(path):
    with _open(path, 'rb') as f:
        try:
            return f.read()
        except (EOFError, gzip.BadGzipFile) as e:
            raise FormatError(f"Error reading '{path}': {e}") from e


def _header(data, path, magic, dims):
    size = 4 * (1 + dims)
    if len(data) < size:
        raise FormatError(f"Error '{path}' is truncated: {len(data)} bytes, no complete header")
    values = struct.unpack(f'>{1 + dims}I', data[:size])
    if values[0] != magic:
        raise FormatError(
            f"Error '{path}' has magic 0x{values[0]:08x}, expected 0x{magic:08x}")
    return values[1:], size


def _payload(data, path, offset, count):
    if len(data) < offset + count:
        raise FormatError(
            f"Error '{path}' is truncated: expected {count} data bytes, "
            f"found {len(data) - offset}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=offset)


def load_idx(images_path, labels_path, *, split='train', class_count=None):
    """
    Load an IDX image file and its label file into a Dataset.

    Pixels are scaled to ``[0, 1]`` by dividing by 255. Without ``class_count`` the
    class count is one more than the largest label.
    """
    image_data = _read(images_path)
    (count, rows, cols), offset = _header(image_data, images_path, IMAGES_MAGIC, 3)
    pixels = _payload(image_data, images_path, offset, count * rows * cols)

    label_data = _read(labels_path)
    (label_count,), label_offset = _header(label_data, labels_path, LABELS_MAGIC, 1)
    if label_count != count:
        raise FormatError(
            f"Error '{images_path}' holds {count} images but "
            f"'{labels_path}' holds {label_count} labels")
    labels = _payload(label_data, labels_path, label_offset, label_count).astype(np.int64)

    images = (pixels.astype(np.float32) / np.float32(255.0)).reshape(count, 1, rows, cols)
    if class_count is None:
        class_count = int(labels.max()) + 1 if labels.size else 1
    logger.info(f"Loaded {count} {rows}x{cols} images from '{images_path}'.")
    return Dataset(images=images, labels=labels, class_count=class_count, split=split)


def write_idx(dataset, images_path, labels_path):
    """Write a single-channel dataset as IDX, quantizing pixels to 256 levels."""
    n, channels, rows, cols = dataset.images.shape
    if channels != 1:
        raise FormatError(f"Error IDX images have one channel, dataset has {channels}")
    if dataset.class_count > 256:
        raise FormatError(f"Error IDX labels are bytes, dataset has {dataset.class_count} classes")
    pixels = np.rint(np.clip(dataset.images, 0.0, 1.0) * 255.0).astype(np.uint8)
    with _open(images_path, 'wb') as f:
        f.write(struct.pack('>IIII', IMAGES_MAGIC, n, rows, cols))
        f.write(pixels.tobytes())
    with _open(labels_path, 'wb') as f:
        f.write(struct.pack('>II', LABELS_MAGIC, n))
        f.write(dataset.labels.astype(np.uint8).tobytes())
    logger.info(f"Wrote {n} images to '{images_path}' and labels to '{labels_path}'.")
