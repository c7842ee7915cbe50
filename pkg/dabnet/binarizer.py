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
Two-value binarization of weight filters.

A real filter ``w`` of ``n`` values is approximated by ``alpha * e + beta * (1 - e)``
where ``e`` is a 0/1 mask with ``K`` ones. For a fixed mask the squared error is
minimised by the two group means, and the best mask for a fixed ``K`` takes either the
``K`` smallest or the ``K`` largest weights. Choosing ``K`` therefore only needs one
sweep over the prefix sums of the sorted filter, maximising

    D(i) = P(i)**2 / i + (T - P(i))**2 / (n - i)

so that ``||w - w_tilde||**2 == ||w||**2 - max D``.

XNOR (``alpha, -alpha`` with ``alpha = mean |w|``) and BNN (``+1, -1``) are provided as
baselines; their masks follow the sign of the weights.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import enum

import numpy as np

from dabnet.errors import DegenerateInputError
from dabnet.errors import NumericError
from dabnet.errors import ShapeError
from dabnet.errors import SizeError
from dabnet.packed_bits import PackedBits

BRUTE_FORCE_MAX_N = 20


class Scheme(enum.Enum):
    DAB = 'dab'
    XNOR = 'xnor'
    BNN = 'bnn'


class Direction(enum.Enum):
    """Whether the alpha-group is the K smallest or the K largest weights."""

    ASCENDING = 'ascending'
    DESCENDING = 'descending'

    def flipped(self):
        if self is Direction.ASCENDING:
            return Direction.DESCENDING
        return Direction.ASCENDING


@dataclass(frozen=True)
class KSearchResult:
    k: int
    direction: Direction
    objective_d: float


@dataclass(frozen=True, eq=False)
class BinarizedFilter:
    """
    One binarized output filter.

    ``mask_e`` marks the alpha-group; ``alpha`` and ``beta`` are kept at float32
    precision so that a filter survives serialization unchanged. For DAB filters
    ``1 <= k <= n - 1`` and ``|alpha| >= |beta|``; XNOR and BNN masks are sign
    masks and may be all zeros or all ones.
    """

    mask_e: PackedBits
    k: int
    alpha: float
    beta: float
    n: int
    scheme: Scheme = Scheme.DAB

    def __post_init__(self):
        object.__setattr__(self, 'alpha', float(np.float32(self.alpha)))
        object.__setattr__(self, 'beta', float(np.float32(self.beta)))
        if self.mask_e.n_bits != self.n or self.mask_e.words.ndim != 1:
            raise ShapeError(
                f"Error mask of {self.mask_e.n_bits} bits does not describe a filter "
                f"of {self.n} values")
        if self.mask_e.popcount() != self.k:
            raise ValueError(
                f"Error mask has {self.mask_e.popcount()} ones but k is {self.k}")
        if self.scheme is Scheme.DAB:
            if not 1 <= self.k <= self.n - 1:
                raise ValueError(f"Error DAB filter needs 1 <= k <= {self.n - 1}, got {self.k}")
            if abs(self.alpha) < abs(self.beta):
                raise ValueError(
                    f"Error DAB filter needs |alpha| >= |beta|, "
                    f"got alpha={self.alpha} beta={self.beta}")

    @property
    def k_norm(self):
        return self.k / self.n

    def mask(self):
        return self.mask_e.to_bools()

    def __eq__(self, other):
        if not isinstance(other, BinarizedFilter):
            return NotImplemented
        return (
            self.mask_e == other.mask_e and self.k == other.k and self.n == other.n and
            self.alpha == other.alpha and self.beta == other.beta and
            self.scheme is other.scheme
        )


def _as_filter_vector(w, *, minimum_n):
    w = np.asarray(w, dtype=np.float32).reshape(-1)
    if not np.all(np.isfinite(w)):
        raise NumericError("Error cannot binarize a filter containing NaN or Inf")
    if w.size < minimum_n:
        raise DegenerateInputError(
            f"Error a filter of {w.size} values cannot be split into two non-empty groups")
    return w


def _sorted_order(w, direction):
    # Stable, so equal values enter the alpha-group by ascending index.
    if direction is Direction.ASCENDING:
        return np.argsort(w, kind='stable')
    return np.argsort(-w, kind='stable')


def _sweep(sorted_w, total):
    """Return (best i, max D, prefix sums) over i in [1, n - 1]; the largest i wins ties."""
    n = sorted_w.size
    prefix = np.cumsum(sorted_w, dtype=np.float64)[:-1]
    i = np.arange(1, n, dtype=np.float64)
    d = prefix ** 2 / i + (total - prefix) ** 2 / (n - i)
    best = n - 2 - int(np.argmax(d[::-1]))
    return best + 1, float(d[best]), prefix


def find_optimal_k(w):
    """
    Find the K and sort direction that maximise D for the filter ``w``.

    Both sort orders are swept; the descending sweep only replaces the ascending one
    when its maximum is strictly greater. The result is reported with the alpha-group
    being the group whose mean is larger in magnitude, which may turn an ascending
    ``i`` into the descending ``n - i`` without changing the partition or D.
    """
    w = _as_filter_vector(w, minimum_n=2)
    w64 = w.astype(np.float64)
    total = float(w64.sum())
    n = w.size

    k, max_d, prefix = _sweep(w64[_sorted_order(w, Direction.ASCENDING)], total)
    direction = Direction.ASCENDING
    k_desc, max_d_desc, prefix_desc = _sweep(w64[_sorted_order(w, Direction.DESCENDING)], total)
    if max_d_desc > max_d:
        k, max_d, prefix, direction = k_desc, max_d_desc, prefix_desc, Direction.DESCENDING

    alpha = prefix[k - 1] / k
    beta = (total - prefix[k - 1]) / (n - k)
    if abs(beta) > abs(alpha):
        k, direction = n - k, direction.flipped()
    return KSearchResult(k=k, direction=direction, objective_d=max_d)


def _select(w, k, direction):
    mask = np.zeros(w.size, dtype=bool)
    mask[_sorted_order(w, direction)[:k]] = True
    return mask


def _two_value_filter(w, mask, scheme=Scheme.DAB):
    """Build the filter with optimal group means for ``mask``, relabelled so |alpha| >= |beta|."""
    w64 = w.astype(np.float64)
    k = int(mask.sum())
    alpha = w64[mask].sum() / k
    beta = w64[~mask].sum() / (w.size - k)
    if abs(beta) > abs(alpha):
        mask, alpha, beta, k = ~mask, beta, alpha, w.size - k
    return BinarizedFilter(PackedBits.from_bools(mask), k, alpha, beta, w.size, scheme)


def binarize_dab(w):
    """Return the distribution-aware binarization of the filter ``w`` (``n >= 2``)."""
    w = _as_filter_vector(w, minimum_n=2)
    result = find_optimal_k(w)
    return _two_value_filter(w, _select(w, result.k, result.direction))


def binarize_fixed_k(w, k, direction=Direction.ASCENDING):
    """Return the optimal two-value filter whose alpha-group is ``k`` extreme weights."""
    w = _as_filter_vector(w, minimum_n=2)
    if not 1 <= k <= w.size - 1:
        raise DegenerateInputError(f"Error k must lie in [1, {w.size - 1}], got {k}")
    return _two_value_filter(w, _select(w, k, direction))


def _sign_mask(w):
    return w >= 0


def binarize_xnor(w):
    w = _as_filter_vector(w, minimum_n=1)
    mask = _sign_mask(w)
    alpha = float(np.abs(w.astype(np.float64)).mean())
    return BinarizedFilter(
        PackedBits.from_bools(mask), int(mask.sum()), alpha, -alpha, w.size, Scheme.XNOR)


def binarize_bnn(w):
    w = _as_filter_vector(w, minimum_n=1)
    mask = _sign_mask(w)
    return BinarizedFilter(
        PackedBits.from_bools(mask), int(mask.sum()), 1.0, -1.0, w.size, Scheme.BNN)


_BINARIZERS = {
    Scheme.DAB: binarize_dab,
    Scheme.XNOR: binarize_xnor,
    Scheme.BNN: binarize_bnn,
}


def binarize(w, scheme):
    return _BINARIZERS[Scheme(scheme)](w)


def binarize_filters(matrix, scheme, threads=1):
    """
    Binarize every row of a ``[filters, n]`` matrix with ``scheme``.

    With ``threads > 1`` the rows are handed to a thread pool; results come back in
    row order and are identical to the sequential ones.
    """
    matrix = np.asarray(matrix, dtype=np.float32)
    matrix = matrix.reshape(matrix.shape[0], -1)
    binarizer = _BINARIZERS[Scheme(scheme)]
    if threads <= 1 or matrix.shape[0] < 2:
        return [binarizer(row) for row in matrix]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(binarizer, matrix))


def brute_force_binarize(w):
    """
    Exhaustively search all ``2**n - 2`` masks for the minimum squared error.

    Exponential; only meant as an oracle for small filters (``n <= 20``).
    """
    w = _as_filter_vector(w, minimum_n=2)
    n = w.size
    if n > BRUTE_FORCE_MAX_N:
        raise SizeError(
            f"Error brute force binarization is limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    w64 = w.astype(np.float64)
    bit_positions = np.arange(n, dtype=np.int64)
    best_error, best_code = np.inf, None
    codes = np.arange(1, 2 ** n - 1, dtype=np.int64)
    for start in range(0, codes.size, 1 << 14):
        chunk = codes[start:start + (1 << 14)]
        masks = ((chunk[:, None] >> bit_positions) & 1).astype(bool)
        k = masks.sum(axis=1)
        alpha = np.where(masks, w64, 0.0).sum(axis=1) / k
        beta = np.where(masks, 0.0, w64).sum(axis=1) / (n - k)
        approx = np.where(masks, alpha[:, None], beta[:, None])
        errors = ((w64 - approx) ** 2).sum(axis=1)
        index = int(np.argmin(errors))
        if errors[index] < best_error:
            best_error, best_code = errors[index], int(chunk[index])
    mask = np.array([(best_code >> i) & 1 for i in range(n)], dtype=bool)
    return _two_value_filter(w, mask)


def reconstruct(f):
    """Expand a binarized filter back into ``alpha * e + beta * (1 - e)``."""
    return np.where(f.mask(), np.float32(f.alpha), np.float32(f.beta)).astype(np.float32)


def approx_error(w, w_tilde):
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    w_tilde = np.asarray(w_tilde, dtype=np.float64).reshape(-1)
    if w.size != w_tilde.size:
        raise ShapeError(f"Error cannot compare filters of {w.size} and {w_tilde.size} values")
    return float(((w - w_tilde) ** 2).sum())


def mean_center(w):
    """Subtract each output filter's mean; axis 0 indexes filters, a vector is one filter."""
    w = np.asarray(w, dtype=np.float32)
    if w.ndim <= 1:
        return (w - w.mean(dtype=np.float64)).astype(np.float32)
    axes = tuple(range(1, w.ndim))
    return (w - w.mean(axis=axes, keepdims=True, dtype=np.float64)).astype(np.float32)


def clamp_unit(w):
    return np.clip(np.asarray(w, dtype=np.float32), -1.0, 1.0)


def condition_weights(w):
    """Mean-center then clamp, the conditioning applied before every binarization."""
    return clamp_unit(mean_center(w))


def filter_errors(w, schemes=tuple(Scheme)):
    """Return ``{scheme: approximation error}`` for one filter, used by diagnostics."""
    w = np.asarray(w, dtype=np.float32).reshape(-1)
    return {
        scheme: approx_error(w, reconstruct(binarize(w, scheme)))
        for scheme in schemes
    }
