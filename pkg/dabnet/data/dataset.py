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

from dataclasses import dataclass
import hashlib

import numpy as np

from dabnet.errors import ConfigError
from dabnet.errors import InputError
from dabnet.errors import ShapeError
from dabnet.tensor import as_real_tensor

SPLITS = ('train', 'test')


@dataclass(eq=False)
class Dataset:
    """
    Images ``[n, 1, h, w]`` with integer labels in ``[0, class_count)``.

    ``class_names`` is optional and only used for reporting.
    """

    images: np.ndarray
    labels: np.ndarray
    class_count: int
    split: str = 'train'
    class_names: tuple = ()

    def __post_init__(self):
        self.images = as_real_tensor(self.images, name='dataset images')
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.images.ndim != 4:
            raise ShapeError(
                f"Error dataset images must be [n, channels, height, width], "
                f"got shape {tuple(self.images.shape)}")
        if self.images.shape[0] != self.labels.size:
            raise ShapeError(
                f"Error dataset has {self.images.shape[0]} images but {self.labels.size} labels")
        if self.class_count < 1:
            raise ShapeError(f"Error class_count must be at least 1, got {self.class_count}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ShapeError(
                f"Error labels must lie in [0, {self.class_count}), "
                f"got [{self.labels.min()}, {self.labels.max()}]")
        if self.split not in SPLITS:
            raise ConfigError(f"Error unknown split '{self.split}', expected one of {SPLITS}")
        self.class_names = tuple(self.class_names)

    def __len__(self):
        return int(self.labels.size)

    @property
    def image_shape(self):
        return tuple(self.images.shape[1:])

    def fingerprint(self):
        """SHA-256 over the shapes, labels and pixels."""
        digest = hashlib.sha256()
        digest.update(repr((self.images.shape, self.class_count)).encode('utf-8'))
        digest.update(self.labels.astype('<i8').tobytes())
        digest.update(self.images.astype('<f4').tobytes())
        return digest.hexdigest()

    def concatenate(self, other):
        if other.class_count != self.class_count or other.image_shape != self.image_shape:
            raise ShapeError("Error cannot concatenate datasets of different shapes or classes")
        return Dataset(
            images=np.concatenate([self.images, other.images]),
            labels=np.concatenate([self.labels, other.labels]),
            class_count=self.class_count,
            split=self.split,
            class_names=self.class_names)

    def class_histogram(self):
        return np.bincount(self.labels, minlength=self.class_count)


def split_and_batch(ds, batch, shuffle_seed=None):
    """
    Yield ``(images, labels)`` batches; the last partial batch is kept.

    With ``shuffle_seed`` (anything ``numpy.random.default_rng`` accepts) the order is
    a seeded permutation, otherwise it is the dataset order.
    """
    if batch < 1:
        raise InputError(f"Error batch size must be at least 1, got {batch}")
    n = len(ds)
    if n == 0:
        raise InputError("Error cannot batch an empty dataset")
    if shuffle_seed is None:
        order = np.arange(n)
    else:
        order = np.random.default_rng(shuffle_seed).permutation(n)
    for start in range(0, n, batch):
        index = order[start:start + batch]
        yield ds.images[index], ds.labels[index]


def horizontal_flip(images, rng):
    """Mirror each image left to right with probability one half."""
    flip = rng.random(images.shape[0]) < 0.5
    out = images.copy()
    out[flip] = out[flip][..., ::-1]
    return out
