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

"""Binarized forward and backward passes over a NetworkConfig."""

from dataclasses import dataclass

import numpy as np

from dabnet.binarize_grad import filter_backward
from dabnet.binarize_grad import GradMode
from dabnet.binarizer import binarize_filters
from dabnet.binarizer import condition_weights
from dabnet.errors import NumericError
from dabnet.errors import ShapeError
from dabnet.errors import StateError
from dabnet.tensor import as_real_tensor


@dataclass
class ForwardCache:
    layer_caches: list
    snapshots: dict
    filters: dict


def _check_batch(config, batch):
    batch = as_real_tensor(batch, name='input batch')
    if batch.ndim != len(config.input_shape) + 1 or \
            tuple(batch.shape[1:]) != config.input_shape:
        raise ShapeError(
            f"Error network expects batches of shape [n, *{config.input_shape}], "
            f"got {tuple(batch.shape)}")
    return batch


def _binarize_layer(layer, w, threads):
    return binarize_filters(w.reshape(w.shape[0], -1), layer.scheme, threads=threads)


def refresh_filters(config, state, *, threads=1):
    """
    Re-binarize every binarized layer from a conditioned copy of its shadow weights.

    The shadow weights themselves are left untouched.
    """
    for layer in config.binarized_layers:
        w = condition_weights(state.w_real(layer.name))
        state.filters[layer.name] = _binarize_layer(layer, w, threads)
    return state


def _run_layers(config, state, x, *, filters, train, threads):
    caches = []
    for layer in config.hidden_layers:
        x, cache = layer.forward(
            x,
            params=state.params.get(layer.name, {}),
            buffers=state.buffers.get(layer.name, {}),
            filters=filters.get(layer.name),
            train=train,
            threads=threads)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"Error non-finite activations after layer '{layer.name}'")
        caches.append(cache)
    return x, caches


def binary_forward(config, state, batch, *, condition=True, threads=1):
    """
    Training forward pass.

    Each binarized layer's shadow weights are mean-centred and clamped in place
    (unless ``condition`` is false), snapshotted, and binarized filter by filter.
    Returns the logits and the cache :func:`binary_backward` needs.
    """
    batch = _check_batch(config, batch)
    snapshots = {}
    filters = {}
    for layer in config.binarized_layers:
        w = state.w_real(layer.name)
        if condition:
            w = condition_weights(w)
            state.params[layer.name]['weight'] = w
        snapshots[layer.name] = w.copy()
        filters[layer.name] = _binarize_layer(layer, w, threads)
    state.filters.update(filters)
    logits, caches = _run_layers(
        config, state, batch, filters=filters, train=True, threads=threads)
    return logits, ForwardCache(layer_caches=caches, snapshots=snapshots, filters=filters)


def _shadow_gradient(snapshot, filters, w_tilde_grad, grad_mode, ste_indicator):
    rows = snapshot.reshape(len(filters), -1)
    upstream = w_tilde_grad.reshape(len(filters), -1)
    grads = [
        filter_backward(w, f, g, grad_mode, ste_indicator=ste_indicator)
        for w, f, g in zip(rows, filters, upstream)
    ]
    return np.stack(grads).reshape(snapshot.shape).astype(np.float32)


def binary_backward(
    config, state, cache, loss_grad, *, grad_mode=GradMode.CLOSED_FORM, ste_indicator=False,
):
    """
    Backpropagate ``loss_grad`` (gradient of the loss with respect to the logits).

    :return: ``{layer name: {parameter name: gradient}}``; binarized weight gradients
        are already mapped onto the shadow weights through the binarization gradient.
    """
    if cache is None:
        raise StateError("Error backward pass called without a forward cache")
    hidden = config.hidden_layers
    if len(cache.layer_caches) != len(hidden):
        raise StateError("Error forward cache does not belong to this network")
    grad = np.asarray(loss_grad, dtype=np.float32)
    gradients = {}
    for layer, layer_cache in zip(reversed(hidden), reversed(cache.layer_caches)):
        grad, layer_grads = layer.backward(layer_cache, grad)
        if layer.binarized:
            layer_grads['weight'] = _shadow_gradient(
                cache.snapshots[layer.name], cache.filters[layer.name],
                layer_grads['weight'], grad_mode, ste_indicator)
        if layer_grads:
            gradients[layer.name] = layer_grads
    return gradients


def infer(config, state, batch, *, threads=1):
    """
    Inference forward pass returning logits.

    Binarized layers read only ``state.filters``; their shadow weights are never used.
    """
    batch = _check_batch(config, batch)
    for layer in config.binarized_layers:
        if layer.name not in state.filters:
            raise StateError(
                f"Error layer '{layer.name}' has no binarized filters; "
                f"call refresh_filters or load a saved model")
    logits, _ = _run_layers(
        config, state, batch, filters=state.filters, train=False, threads=threads)
    return logits
