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
Backward passes through the binarization maps and the sign activation.

The mask and K of a binarized filter are constants of the backward pass; no gradient
flows through the sort. All passes compose with the upstream gradient elementwise.
"""

import enum

import numpy as np

from dabnet.binarizer import Scheme
from dabnet.errors import ShapeError


class GradMode(enum.Enum):
    # Closed-form gradient with the value-scaled straight-through estimator.
    CLOSED_FORM = 'paper'
    # Exact Jacobian of w -> alpha * e + beta * (1 - e) at a fixed mask.
    PROJECTION = 'projection'


def _check_lengths(f, *vectors):
    for vector in vectors:
        if vector.size != f.n:
            raise ShapeError(
                f"Error expected {f.n} values to match the binarized filter, got {vector.size}")


def _ste(values, w, indicator):
    inside = np.abs(w) <= 1.0
    if indicator:
        return inside.astype(np.float64)
    return np.where(inside, values, 0.0)


def dab_backward_closed_form(w, f, upstream, *, ste_indicator=False):
    """
    Gradient of a DAB filter following the closed form ``G = G1 + G2``.

    ``T_k`` holds the alpha-group weights (zeros elsewhere) and ``sgn(0) = 0``::

        G1 = sgn(T_k) / K * sgn(T_k) + ||T_k||_1 / K * STE(T_k)
        G2 = sgn(w - T_k) / (n - K) * (1 - sgn(T_k))
             + ||w - T_k||_1 / (n - K) * STE(w - T_k)

    ``STE(v)`` keeps ``v`` where ``|w| <= 1`` and is zero elsewhere; with
    ``ste_indicator`` it is the indicator ``1{|w| <= 1}`` instead.
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    _check_lengths(f, w, upstream)
    n, k = f.n, f.k
    t_k = np.where(f.mask(), w, 0.0)
    rest = w - t_k
    sgn_t_k = np.sign(t_k)
    g1 = sgn_t_k / k * sgn_t_k + np.abs(t_k).sum() / k * _ste(t_k, w, ste_indicator)
    g2 = (
        np.sign(rest) / (n - k) * (1.0 - sgn_t_k) +
        np.abs(rest).sum() / (n - k) * _ste(rest, w, ste_indicator)
    )
    return (upstream * (g1 + g2)).astype(np.float32)


def dab_backward_projection(f, upstream):
    """Project ``upstream`` onto the span of ``e`` and ``1 - e`` (group means)."""
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    _check_lengths(f, upstream)
    mask = f.mask()
    grad = np.zeros(f.n, dtype=np.float64)
    if f.k:
        grad[mask] = upstream[mask].sum() / f.k
    if f.n - f.k:
        grad[~mask] = upstream[~mask].sum() / (f.n - f.k)
    return grad.astype(np.float32)


def xnor_backward(w, f, upstream):
    """Gradient of ``mean|w| * sign(w)``: ``1/n + alpha * 1{|w| <= 1}`` per element."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    _check_lengths(f, w, upstream)
    local = 1.0 / f.n + f.alpha * (np.abs(w) <= 1.0)
    return (upstream * local).astype(np.float32)


def bnn_backward(w, upstream):
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if w.size != upstream.size:
        raise ShapeError(f"Error shapes differ: {w.size} weights, {upstream.size} gradients")
    return (upstream * (np.abs(w) <= 1.0)).astype(np.float32)


def filter_backward(w, f, upstream, grad_mode=GradMode.CLOSED_FORM, *, ste_indicator=False):
    """Dispatch one filter's weight gradient on its scheme and the grad mode."""
    if f.scheme is Scheme.XNOR:
        return xnor_backward(w, f, upstream)
    if f.scheme is Scheme.BNN:
        return bnn_backward(w, upstream)
    if GradMode(grad_mode) is GradMode.PROJECTION:
        return dab_backward_projection(f, upstream)
    return dab_backward_closed_form(w, f, upstream, ste_indicator=ste_indicator)


def sign_activation_forward(x):
    """Elementwise sign with ``sign(0) = +1``, so outputs are always +1 or -1."""
    x = np.asarray(x, dtype=np.float32)
    return np.where(x >= 0, np.float32(1.0), np.float32(-1.0))


def sign_activation_backward(x, upstream):
    """Hard-tanh straight-through estimator: pass ``upstream`` where ``|x| <= 1``."""
    x = np.asarray(x, dtype=np.float32)
    upstream = np.asarray(upstream, dtype=np.float32)
    if x.shape != upstream.shape:
        raise ShapeError(
            f"Error activation shape {tuple(x.shape)} does not match "
            f"gradient shape {tuple(upstream.shape)}")
    return np.where(np.abs(x) <= 1.0, upstream, np.float32(0.0))
