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
Popcount kernels for two-value weights against +1/-1 inputs.

With inputs packed as sign bits (bit set for +1) and a filter mask ``e`` with ``K``
ones, the dot product of the inputs with ``alpha * e + beta * (1 - e)`` is::

    S_e = 2 * popcount(x & e) - K        # sum of the inputs inside the alpha-group
    S   = 2 * popcount(x) - n            # sum of all inputs
    dot = alpha * S_e + beta * (S - S_e)

Both sums are exact integers; only the final combination is floating point.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from dabnet.errors import EncodingError
from dabnet.errors import ShapeError
from dabnet.packed_bits import PackedBits
from dabnet.tensor import as_real_tensor
from dabnet.tensor import conv_output_size
from dabnet.tensor import im2col
from dabnet.tensor import kernel_pair
from dabnet.tensor import shape4

# Upper bound on the [rows, filters, words] intermediate of one gemm chunk.
GEMM_CHUNK_WORDS = 1 << 22

# Padding value of binarized convolutions; a sign bit cannot encode zero.
BINARY_PAD_VALUE = -1.0


def pack_signs(x):
    """Pack a +1/-1 vector (or a matrix, row by row) into sign bits."""
    x = np.asarray(x, dtype=np.float32)
    positive = x == 1.0
    if not np.all(positive | (x == -1.0)):
        raise EncodingError("Error only +1 and -1 values can be packed as signs")
    return PackedBits.from_bools(positive)


def masked_popcount(bits, mask):
    if bits.n_bits != mask.n_bits:
        raise ShapeError(f"Error bit lengths differ: {bits.n_bits} and {mask.n_bits}")
    return int(np.bitwise_count(bits.words & mask.words).sum(dtype=np.int64))


def dab_dot(input_bits, f):
    if input_bits.n_bits != f.n:
        raise ShapeError(
            f"Error input of {input_bits.n_bits} bits does not match a filter of {f.n} values")
    s_e = 2 * masked_popcount(input_bits, f.mask_e) - f.k
    s = 2 * input_bits.popcount() - f.n
    return f.alpha * s_e + f.beta * (s - s_e)


def _stack_filters(filters, n_bits):
    for f in filters:
        if f.n != n_bits:
            raise ShapeError(
                f"Error filter of {f.n} values does not match input rows of {n_bits} bits")
    masks = np.stack([f.mask_e.words for f in filters]) if filters else None
    k = np.array([f.k for f in filters], dtype=np.int64)
    alpha = np.array([f.alpha for f in filters], dtype=np.float64)
    beta = np.array([f.beta for f in filters], dtype=np.float64)
    return masks, k, alpha, beta


def _gemm_rows(words, row_sums, masks, k, alpha, beta):
    masked = np.bitwise_count(words[:, None, :] & masks[None, :, :]).sum(axis=-1, dtype=np.int64)
    s_e = 2 * masked - k
    s = row_sums[:, None]
    return (alpha * s_e + beta * (s - s_e)).astype(np.float32)


def dab_gemm(inputs, filters, threads=1):
    """
    Evaluate ``out[i, j] = dab_dot(row i, filter j)`` for a packed ``[m, n]`` input.

    The unmasked popcount of each row is computed once and shared by every filter.
    Rows are processed in chunks; with ``threads > 1`` the chunks run on a thread
    pool. Every output cell is computed independently, so the result does not depend
    on the thread count.
    """
    words = inputs.words if inputs.words.ndim == 2 else inputs.words[None, :]
    m = words.shape[0]
    masks, k, alpha, beta = _stack_filters(filters, inputs.n_bits)
    out = np.zeros((m, len(filters)), dtype=np.float32)
    if m == 0 or not filters:
        return out
    row_sums = 2 * np.bitwise_count(words).sum(axis=-1, dtype=np.int64) - inputs.n_bits
    chunk = max(1, GEMM_CHUNK_WORDS // max(1, masks.shape[0] * masks.shape[1]))
    starts = range(0, m, chunk)

    def run(start):
        stop = start + chunk
        out[start:stop] = _gemm_rows(
            words[start:stop], row_sums[start:stop], masks, k, alpha, beta)

    if threads <= 1 or len(starts) < 2:
        for start in starts:
            run(start)
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            list(executor.map(run, starts))
    return out


def binary_conv2d(x, filters, stride=1, padding=0, *, kernel_hw=None, threads=1):
    """
    Convolve a +1/-1 NCHW batch with binarized filters through im2col and dab_gemm.

    Padded positions contribute -1. Without ``kernel_hw`` the kernel is taken to be
    square, ``n = c * k * k``.
    """
    x = as_real_tensor(x, name='binary conv input')
    n, c, h, w = shape4(x)
    if kernel_hw is None:
        kernel_hw = _square_kernel(filters, c)
    cols = im2col(x, kernel_hw, stride, padding, pad_value=BINARY_PAD_VALUE)
    positions = cols.shape[2]
    kh, kw = kernel_pair(kernel_hw)
    out_h = conv_output_size(h, kh, stride, padding)
    out_w = conv_output_size(w, kw, stride, padding)
    rows = cols.transpose(0, 2, 1).reshape(n * positions, cols.shape[1])
    out = dab_gemm(pack_signs(rows), filters, threads=threads)
    return np.ascontiguousarray(
        out.reshape(n, out_h, out_w, len(filters)).transpose(0, 3, 1, 2))


def _square_kernel(filters, channels):
    if not filters:
        raise ShapeError("Error cannot infer a kernel size without filters")
    side = int(round((filters[0].n / channels) ** 0.5))
    if channels * side * side != filters[0].n:
        raise ShapeError(
            f"Error filters of {filters[0].n} values do not form a square kernel "
            f"over {channels} channels")
    return side
