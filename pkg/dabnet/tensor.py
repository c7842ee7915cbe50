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
Dense float tensors and the reference kernels.

Tensors are plain ``numpy`` arrays of 32-bit floats in row-major (C) order.
Convolution layouts are always NCHW, and a conv filter bank has the shape
``[out, c, h, w]`` so that one output filter flattens to ``n = c * h * w`` values.

The kernels here are deliberately simple; they are the oracles the bit-packed
kernels and the network's float path are checked against.
"""

import collections

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from dabnet.errors import BoundsError
from dabnet.errors import NumericError
from dabnet.errors import ShapeError

Shape4 = collections.namedtuple('Shape4', ['n', 'c', 'h', 'w'])


def as_real_tensor(values, *, name='tensor'):
    """Return ``values`` as a contiguous float32 array, rejecting NaN and Inf."""
    array = np.ascontiguousarray(values, dtype=np.float32)
    if not np.all(np.isfinite(array)):
        raise NumericError(f"Error {name} contains non-finite values")
    return array


def shape4(tensor):
    if tensor.ndim != 4:
        raise ShapeError(f"Error expected an NCHW tensor, got shape {tuple(tensor.shape)}")
    return Shape4(*tensor.shape)


def kernel_pair(value):
    if isinstance(value, (tuple, list)):
        if len(value) != 2:
            raise ShapeError(f"Error expected a (height, width) pair, got {value!r}")
        return int(value[0]), int(value[1])
    return int(value), int(value)


def flatten_filter(weights, filter_index):
    """Return output filter ``filter_index`` of ``weights`` as a flat row-major vector."""
    weights = np.asarray(weights, dtype=np.float32)
    if weights.ndim < 2:
        raise ShapeError(
            f"Error expected a filter bank with at least 2 dimensions, "
            f"got shape {tuple(weights.shape)}")
    out = weights.shape[0]
    if not 0 <= filter_index < out:
        raise BoundsError(f"Error filter index {filter_index} out of range [0, {out})")
    return np.ascontiguousarray(weights[filter_index]).reshape(-1)


def unflatten_filter(vector, filter_shape):
    vector = np.asarray(vector, dtype=np.float32)
    if vector.size != int(np.prod(filter_shape)):
        raise ShapeError(
            f"Error cannot reshape {vector.size} values into filter shape {tuple(filter_shape)}")
    return vector.reshape(filter_shape)


def reference_matmul(a, b):
    """
    Multiply ``a [m, k]`` by ``b [k, p]``, accumulating in float32 over ``k`` in order.

    Each output cell receives its products strictly left to right, which keeps the
    result independent of any BLAS blocking strategy.
    """
    a = as_real_tensor(a, name='left operand')
    b = as_real_tensor(b, name='right operand')
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"Error cannot multiply shapes {tuple(a.shape)} and {tuple(b.shape)}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float32)
    for t in range(a.shape[1]):
        out += a[:, t, None] * b[None, t, :]
    return out


def conv_output_size(size, kernel, stride, padding):
    span = size + 2 * padding - kernel
    if stride < 1 or span < 0 or span % stride != 0:
        raise ShapeError(
            f"Error input size {size} with kernel {kernel}, stride {stride} and "
            f"padding {padding} does not give an integer output size")
    return span // stride + 1


def pad_nchw(x, padding, pad_value=0.0):
    if padding == 0:
        return x
    return np.pad(
        x,
        ((0, 0), (0, 0), (padding, padding), (padding, padding)),
        mode='constant',
        constant_values=pad_value,
    )


def im2col(x, kernel_hw, stride=1, padding=0, pad_value=0.0):
    """
    Lower an NCHW batch to per-item column matrices.

    :return: array of shape ``[n, c * kh * kw, out_h * out_w]``; column ``t`` of item
        ``i`` holds the receptive field of output position ``t`` ordered ``(c, kh, kw)``.
    """
    x = as_real_tensor(x, name='im2col input')
    n, c, h, w = shape4(x)
    kh, kw = kernel_pair(kernel_hw)
    out_h = conv_output_size(h, kh, stride, padding)
    out_w = conv_output_size(w, kw, stride, padding)
    x = pad_nchw(x, padding, pad_value)
    # windows: [n, c, out_h, out_w, kh, kw]
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = windows.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, out_h * out_w)
    return np.ascontiguousarray(cols)


def col2im(cols, input_shape, kernel_hw, stride=1, padding=0):
    """Scatter-add column gradients back onto an NCHW tensor, the adjoint of im2col."""
    n, c, h, w = input_shape
    kh, kw = kernel_pair(kernel_hw)
    out_h = conv_output_size(h, kh, stride, padding)
    out_w = conv_output_size(w, kw, stride, padding)
    cols = np.asarray(cols, dtype=np.float32).reshape(n, c, kh, kw, out_h, out_w)
    padded = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=np.float32)
    for i in range(kh):
        for j in range(kw):
            padded[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += \
                cols[:, :, i, j]
    return padded[:, :, padding:padding + h, padding:padding + w]


def reference_conv2d(x, weights, stride=1, padding=0, pad_value=0.0):
    """Direct cross-correlation (no kernel flip) of an NCHW batch with ``[f, c, kh, kw]``."""
    x = as_real_tensor(x, name='conv input')
    weights = as_real_tensor(weights, name='conv weights')
    n, c, h, w = shape4(x)
    f, wc, kh, kw = shape4(weights)
    if wc != c:
        raise ShapeError(f"Error input has {c} channels but the filters expect {wc}")
    out_h = conv_output_size(h, kh, stride, padding)
    out_w = conv_output_size(w, kw, stride, padding)
    x = pad_nchw(x, padding, pad_value)
    out = np.zeros((n, f, out_h, out_w), dtype=np.float32)
    for i in range(out_h):
        for j in range(out_w):
            patch = x[:, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
            out[:, :, i, j] = np.tensordot(patch, weights, axes=([1, 2, 3], [1, 2, 3]))
    return out
