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
A deterministic generator of single-stroke shape images.

Each image holds one shape drawn with 1-pixel-wide strokes on a black background.
Position, scale and rotation are jittered per image. Closed shapes always fit inside
the canvas; lines are drawn longer than the other shapes so that even a diagonal one
covers more than 1% of a 32x32 image, and are clipped at the border.
"""

import math

import numpy as np

from dabnet.errors import ConfigError
from .dataset import Dataset

SKETCH_CLASSES = ('line', 'circle', 'rectangle', 'triangle')

MIN_SIZE = 16

# Jitter bounds as fractions of the image size.
_RADIUS = 0.25
_SCALE_JITTER = 0.2
_OFFSET_JITTER = 0.1
# Half-length of a line relative to the radius of the closed shapes.
_LINE_STRETCH = 1.4


def _stroke(canvas, start, end):
    """Draw a segment whose consecutive pixels are 8-connected."""
    (r0, c0), (r1, c1) = start, end
    steps = int(max(abs(r1 - r0), abs(c1 - c0)))
    t = np.linspace(0.0, 1.0, steps + 1)
    rows = np.rint(r0 + t * (r1 - r0)).astype(np.int64)
    cols = np.rint(c0 + t * (c1 - c0)).astype(np.int64)
    canvas[rows, cols] = 1.0


def _polyline(canvas, points, closed):
    size = canvas.shape[0]
    points = [tuple(int(v) for v in np.clip(np.rint(p), 0, size - 1)) for p in points]
    pairs = zip(points, points[1:] + points[:1]) if closed else zip(points, points[1:])
    for start, end in pairs:
        _stroke(canvas, start, end)


def _rotate(points, angle):
    c, s = math.cos(angle), math.sin(angle)
    return [(x * c - y * s, x * s + y * c) for x, y in points]


def _line(radius, rng):
    half = _LINE_STRETCH * radius
    return _rotate([(-half, 0.0), (half, 0.0)], rng.uniform(0.0, math.pi)), False


def _circle(radius, rng):
    count = max(16, int(math.ceil(2.0 * math.pi * radius)))
    angles = np.arange(count) * (2.0 * math.pi / count)
    return [(radius * math.cos(a), radius * math.sin(a)) for a in angles], True


def _rectangle(radius, rng):
    half_w = radius * rng.uniform(0.5, 0.8)
    half_h = radius * rng.uniform(0.5, 0.8)
    corners = [(-half_w, -half_h), (half_w, -half_h), (half_w, half_h), (-half_w, half_h)]
    return _rotate(corners, rng.uniform(0.0, math.pi / 2.0)), True


def _triangle(radius, rng):
    corners = [
        (radius * math.cos(a), radius * math.sin(a))
        for a in (math.pi / 2.0, math.pi / 2.0 + 2.0 * math.pi / 3.0,
                  math.pi / 2.0 + 4.0 * math.pi / 3.0)
    ]
    return _rotate(corners, rng.uniform(0.0, 2.0 * math.pi)), True


_SHAPES = {
    'line': _line,
    'circle': _circle,
    'rectangle': _rectangle,
    'triangle': _triangle,
}


def draw_sketch(shape, size, rng):
    """Rasterize one jittered ``shape`` into a ``[size, size]`` float32 image of 0s and 1s."""
    canvas = np.zeros((size, size), dtype=np.float32)
    radius = _RADIUS * size * (1.0 + rng.uniform(-_SCALE_JITTER, _SCALE_JITTER))
    center = (size - 1) / 2.0 + rng.uniform(-_OFFSET_JITTER, _OFFSET_JITTER, size=2) * size
    points, closed = _SHAPES[shape](radius, rng)
    _polyline(canvas, [(center[0] + y, center[1] + x) for x, y in points], closed)
    return canvas


def generate_sketches(classes=SKETCH_CLASSES, per_class=500, size=32, seed=1, split='train'):
    """
    Generate ``per_class`` images of every class in ``classes``.

    Classes are interleaved (image ``i`` has label ``i % len(classes)``) and every
    image is drawn from one ``numpy.random.default_rng(seed)`` stream, so equal
    arguments give byte-identical datasets.
    """
    classes = tuple(classes)
    unknown = [name for name in classes if name not in _SHAPES]
    if unknown or not classes:
        raise ConfigError(
            f"Error unknown sketch classes {unknown}, "
            f"supported classes: [{', '.join(SKETCH_CLASSES)}]")
    if size < MIN_SIZE:
        raise ConfigError(f"Error sketch size must be at least {MIN_SIZE}, got {size}")
    if per_class < 1:
        raise ConfigError(f"Error per_class must be at least 1, got {per_class}")
    rng = np.random.default_rng(seed)
    count = per_class * len(classes)
    images = np.zeros((count, 1, size, size), dtype=np.float32)
    labels = np.arange(count, dtype=np.int64) % len(classes)
    for i in range(count):
        images[i, 0] = draw_sketch(classes[labels[i]], size, rng)
    return Dataset(
        images=images, labels=labels, class_count=len(classes), split=split,
        class_names=classes)
