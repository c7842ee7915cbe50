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
Layers of the minimal network stack.

Every layer is built from a single-key YAML entry, the same way a layer kind maps
to a class in :func:`dabnet.nn.config.create_layer_by_name`. Forward passes return
``(output, cache)``; backward passes take that cache and the upstream gradient and
return ``(input gradient, {parameter name: gradient})``.

For binarized weight layers the ``'weight'`` gradient returned by ``backward`` is
the gradient with respect to the binarized weights; mapping it back onto the shadow
weights is done by :func:`dabnet.nn.network.binary_backward`.
"""

import enum
import math

import numpy as np

from dabnet.binarize_grad import sign_activation_backward
from dabnet.binarize_grad import sign_activation_forward
from dabnet.binarizer import reconstruct
from dabnet.binarizer import Scheme
from dabnet.bitkernel import BINARY_PAD_VALUE
from dabnet.bitkernel import dab_gemm
from dabnet.bitkernel import pack_signs
from dabnet.errors import ConfigError
from dabnet.errors import InputError
from dabnet.errors import ShapeError
from dabnet.errors import StateError
from dabnet.tensor import col2im
from dabnet.tensor import conv_output_size
from dabnet.tensor import im2col


class BinMode(enum.Enum):
    FPREC = 'fprec'
    WBIN = 'wbin'
    FBIN = 'fbin'


class Layer(object):
    """
    Base class for all layers, which just takes care of some boilerplate logic.

    Subclasses list the entry keys they accept (besides ``name``) in ``supported_keys``.
    """

    supported_keys = ()

    def __init__(self, layer_kind, layer_entry_dictionary, network_context):
        self.kind = layer_kind
        file_name = network_context.configuration_file_path
        if not isinstance(layer_entry_dictionary, dict):
            raise ConfigError(
                f"Error parsing file '{file_name}', the '{layer_kind}' entry must be a dict, "
                f"got a '{type(layer_entry_dictionary)}' instead")
        if 'name' not in layer_entry_dictionary:
            raise ConfigError(
                f"Error '{layer_kind}' entry without 'name' field found in '{file_name}'")
        self.name = str(layer_entry_dictionary['name'])
        for key in layer_entry_dictionary:
            if key != 'name' and key not in self.supported_keys:
                supported = ', '.join(('name',) + tuple(self.supported_keys))
                raise ConfigError(
                    f"Error layer '{self.name}' ({layer_kind}) does not support key '{key}', "
                    f"supported keys: [{supported}]")

        self.layer_entry_dictionary = dict(layer_entry_dictionary)
        self.network_context = network_context
        self.bin_mode = BinMode.FPREC
        self.scheme = None
        self.input_shape = None
        self.output_shape = None

    @property
    def binarized(self):
        return self.bin_mode is not BinMode.FPREC

    def setting(self, key, default):
        """Return an integer entry setting, which must be at least one (zero for padding)."""
        value = self.layer_entry_dictionary.get(key, default)
        minimum = 0 if key == 'padding' else 1
        if value is None or isinstance(value, bool) or not isinstance(value, int) or \
                value < minimum:
            raise ConfigError(
                f"Error layer '{self.name}' ({self.kind}) expects '{key}' to be an integer "
                f">= {minimum}, got '{value}'")
        return value

    def resolve(self, input_shape):
        """Record the input shape and infer the output shape; raises ShapeError."""
        self.input_shape = tuple(int(d) for d in input_shape)
        self.output_shape = tuple(self.infer_output_shape(self.input_shape))
        return self.output_shape

    def infer_output_shape(self, input_shape):
        return input_shape

    def init_params(self, rng):
        return {}

    def init_buffers(self):
        return {}

    def to_entry(self):
        return {self.kind: dict(self.layer_entry_dictionary)}

    def check_input(self, x):
        if self.input_shape is not None and tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(
                f"Error layer '{self.name}' expects inputs of shape {self.input_shape}, "
                f"got {tuple(x.shape[1:])}")

    def forward(self, x, *, params, buffers, filters, train, threads=1):
        raise NotImplementedError("Should be implemented by subclasses of Layer.")

    def backward(self, cache, grad):
        raise NotImplementedError("Should be implemented by subclasses of Layer.")


class WeightLayer(Layer):
    """Common logic of conv2d and dense: mode, scheme, bias and binarized weights."""

    def __init__(self, layer_kind, layer_entry_dictionary, network_context):
        super().__init__(layer_kind, layer_entry_dictionary, network_context)
        mode = self.layer_entry_dictionary.get('mode', BinMode.FPREC.value)
        try:
            self.bin_mode = BinMode(mode)
        except ValueError:
            modes = ', '.join(m.value for m in BinMode)
            raise ConfigError(
                f"Error layer '{self.name}' has unknown mode '{mode}', "
                f"supported modes: [{modes}]") from None
        scheme = self.layer_entry_dictionary.get('scheme')
        if scheme is not None and not self.binarized:
            raise ConfigError(
                f"Error layer '{self.name}' sets scheme '{scheme}' but is full precision")
        if self.binarized:
            try:
                self.scheme = Scheme(scheme or Scheme.DAB.value)
            except ValueError:
                schemes = ', '.join(s.value for s in Scheme)
                raise ConfigError(
                    f"Error layer '{self.name}' has unknown scheme '{scheme}', "
                    f"supported schemes: [{schemes}]") from None
        bias = self.layer_entry_dictionary.get('bias', True)
        if not isinstance(bias, bool):
            raise ConfigError(f"Error layer '{self.name}' expects 'bias' to be true or false")
        # Binarized layers never carry a bias.
        self.use_bias = bias and not self.binarized

    @property
    def weight_shape(self):
        raise NotImplementedError("Should be implemented by subclasses of WeightLayer.")

    @property
    def fan_in(self):
        return math.prod(self.weight_shape[1:])

    def init_params(self, rng):
        std = math.sqrt(2.0 / self.fan_in)
        params = {'weight': rng.normal(0.0, std, size=self.weight_shape).astype(np.float32)}
        if self.use_bias:
            params['bias'] = np.zeros(self.weight_shape[0], dtype=np.float32)
        return params

    def effective_weights(self, params, filters):
        """Return the ``[filters, n]`` weight matrix the forward pass multiplies with."""
        if not self.binarized:
            return params['weight'].reshape(self.weight_shape[0], -1)
        if filters is None:
            raise StateError(f"Error layer '{self.name}' has no binarized filters")
        if len(filters) != self.weight_shape[0]:
            raise ShapeError(
                f"Error layer '{self.name}' expects {self.weight_shape[0]} filters, "
                f"got {len(filters)}")
        return np.stack([reconstruct(f) for f in filters])


class Conv2d(WeightLayer):
    supported_keys = ('out_channels', 'kernel', 'stride', 'padding', 'bias', 'mode', 'scheme')

    def __init__(self, layer_kind, layer_entry_dictionary, network_context):
        super().__init__(layer_kind, layer_entry_dictionary, network_context)
        self.out_channels = self.setting('out_channels', None)
        self.kernel = self.setting('kernel', None)
        self.stride = self.setting('stride', 1)
        self.padding = self.setting('padding', 0)
        self.in_channels = None

    def infer_output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeError(
                f"Error layer '{self.name}' expects [channels, height, width] inputs, "
                f"got {input_shape}")
        c, h, w = input_shape
        self.in_channels = c
        out_h = conv_output_size(h, self.kernel, self.stride, self.padding)
        out_w = conv_output_size(w, self.kernel, self.stride, self.padding)
        return (self.out_channels, out_h, out_w)

    @property
    def weight_shape(self):
        return (self.out_channels, self.in_channels, self.kernel, self.kernel)

    def forward(self, x, *, params, buffers, filters, train, threads=1):
        self.check_input(x)
        n = x.shape[0]
        _, out_h, out_w = self.output_shape
        weights = self.effective_weights(params, filters)
        pad_value = BINARY_PAD_VALUE if self.bin_mode is BinMode.FBIN else 0.0
        cols = im2col(x, self.kernel, self.stride, self.padding, pad_value=pad_value)
        if self.bin_mode is BinMode.FBIN:
            positions = cols.shape[2]
            rows = cols.transpose(0, 2, 1).reshape(n * positions, cols.shape[1])
            out = dab_gemm(pack_signs(rows), filters, threads=threads)
            y = out.reshape(n, positions, self.out_channels).transpose(0, 2, 1)
        else:
            y = np.matmul(weights, cols)
            if self.use_bias:
                y = y + params['bias'][None, :, None]
        y = np.ascontiguousarray(y, dtype=np.float32).reshape(n, self.out_channels, out_h, out_w)
        return y, (x.shape, cols, weights)

    def backward(self, cache, grad):
        x_shape, cols, weights = cache
        n = x_shape[0]
        g = grad.reshape(n, self.out_channels, -1)
        grads = {
            'weight': np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(
                self.weight_shape).astype(np.float32),
        }
        if self.use_bias:
            grads['bias'] = g.sum(axis=(0, 2)).astype(np.float32)
        dcols = np.matmul(weights.T, g)
        dx = col2im(dcols, x_shape, self.kernel, self.stride, self.padding)
        return dx.astype(np.float32), grads


class Dense(WeightLayer):
    """Fully connected layer; inputs of any shape are flattened per sample."""

    supported_keys = ('units', 'bias', 'mode', 'scheme')

    def __init__(self, layer_kind, layer_entry_dictionary, network_context):
        super().__init__(layer_kind, layer_entry_dictionary, network_context)
        self.units = self.setting('units', None)
        self.in_features = None

    def infer_output_shape(self, input_shape):
        self.in_features = math.prod(input_shape)
        return (self.units,)

    @property
    def weight_shape(self):
        return (self.units, self.in_features)

    def forward(self, x, *, params, buffers, filters, train, threads=1):
        self.check_input(x)
        flat = x.reshape(x.shape[0], -1)
        weights = self.effective_weights(params, filters)
        if self.bin_mode is BinMode.FBIN:
            y = dab_gemm(pack_signs(flat), filters, threads=threads)
        else:
            y = flat @ weights.T
            if self.use_bias:
                y = y + params['bias'][None, :]
        return y.astype(np.float32), (x.shape, flat, weights)

    def backward(self, cache, grad):
        x_shape, flat, weights = cache
        grads = {'weight': (grad.T @ flat).astype(np.float32)}
        if self.use_bias:
            grads['bias'] = grad.sum(axis=0).astype(np.float32)
        dx = (grad @ weights).reshape(x_shape)
        return dx.astype(np.float32), grads


class BatchNorm(Layer):
    """Per-channel (4-D inputs) or per-feature (2-D inputs) batch normalization."""

    supported_keys = ('momentum', 'eps')

    def __init__(self, layer_kind, layer_entry_dictionary, network_context):
        super().__init__(layer_kind, layer_entry_dictionary, network_context)
        self.momentum = float(self.layer_entry_dictionary.get('momentum', 0.1))
        self.eps = float(self.layer_entry_dictionary.get('eps', 1e-5))
        if not 0.0 < self.momentum <= 1.0 or self.eps <= 0.0:
            raise ConfigError(
                f"Error layer '{self.name}' needs 0 < momentum <= 1 and eps > 0")

    @property
    def channels(self):
        return self.input_shape[0]

    def _axes(self, x):
        return (0,) if x.ndim == 2 else (0,) + tuple(range(2, x.ndim))

    def _view(self, values, x):
        return values.reshape((1, -1) + (1,) * (x.ndim - 2))

    def init_params(self, rng):
        return {
            'gamma': np.ones(self.channels, dtype=np.float32),
            'beta': np.zeros(self.channels, dtype=np.float32),
        }

    def init_buffers(self):
        return {
            'running_mean': np.zeros(self.channels, dtype=np.float32),
            'running_var': np.ones(self.channels, dtype=np.float32),
        }

    def forward(self, x, *, params, buffers, filters, train, threads=1):
        self.check_input(x)
        axes = self._axes(x)
        if train:
            count = x.size // self.channels
            mean = x.mean(axis=axes, dtype=np.float64)
            var = x.var(axis=axes, dtype=np.float64)
            unbiased = var * count / max(count - 1, 1)
            m = self.momentum
            buffers['running_mean'] = (
                (1.0 - m) * buffers['running_mean'] + m * mean).astype(np.float32)
            buffers['running_var'] = (
                (1.0 - m) * buffers['running_var'] + m * unbiased).astype(np.float32)
        else:
            mean = buffers['running_mean'].astype(np.float64)
            var = buffers['running_var'].astype(np.float64)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - self._view(mean, x)) * self._view(inv_std, x)
        y = self._view(params['gamma'], x) * x_hat + self._view(params['beta'], x)
        return y.astype(np.float32), (x_hat, inv_std, params['gamma'])

    def backward(self, cache, grad):
        x_hat, inv_std, gamma = cache
        axes = self._axes(grad)
        count = grad.size // grad.shape[1]
        grads = {
            'gamma': (grad * x_hat).sum(axis=axes).astype(np.float32),
            'beta': grad.sum(axis=axes).astype(np.float32),
        }
        d_hat = grad * self._view(gamma, grad)
        dx = self._view(inv_std, grad) / count * (
            count * d_hat -
            d_hat.sum(axis=axes, keepdims=True) -
            x_hat * (d_hat * x_hat).sum(axis=axes, keepdims=True))
        return dx.astype(np.float32), grads


class MaxPool(Layer):
    """Non-overlapping max pooling; ``stride`` must equal ``kernel``."""

    supported_keys = ('kernel', 'stride')

    def __init__(self, layer_kind, layer_entry_dictionary, network_context):
        super().__init__(layer_kind, layer_entry_dictionary, network_context)
        self.kernel = self.setting('kernel', 2)
        self.stride = self.setting('stride', self.kernel)
        if self.stride != self.kernel:
            raise ConfigError(
                f"Error layer '{self.name}' only supports stride equal to kernel, "
                f"got kernel {self.kernel} and stride {self.stride}")

    def infer_output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise ShapeError(
                f"Error layer '{self.name}' expects [channels, height, width] inputs, "
                f"got {input_shape}")
        c, h, w = input_shape
        if h % self.kernel or w % self.kernel:
            raise ShapeError(
                f"Error layer '{self.name}' cannot pool {h}x{w} by {self.kernel}")
        return (c, h // self.kernel, w // self.kernel)

    def _windows(self, x):
        n, c, h, w = x.shape
        k = self.kernel
        return x.reshape(n, c, h // k, k, w // k, k).transpose(0, 1, 2, 4, 3, 5).reshape(
            n, c, h // k, w // k, k * k)

    def forward(self, x, *, params, buffers, filters, train, threads=1):
        self.check_input(x)
        windows = self._windows(x)
        index = windows.argmax(axis=-1)
        y = np.take_along_axis(windows, index[..., None], axis=-1)[..., 0]
        return y, (x.shape, index)

    def backward(self, cache, grad):
        (n, c, h, w), index = cache
        k = self.kernel
        windows = np.zeros(grad.shape + (k * k,), dtype=np.float32)
        np.put_along_axis(windows, index[..., None], grad[..., None], axis=-1)
        dx = windows.reshape(n, c, h // k, w // k, k, k).transpose(0, 1, 2, 4, 3, 5)
        return dx.reshape(n, c, h, w), {}


class ReLU(Layer):

    def forward(self, x, *, params, buffers, filters, train, threads=1):
        self.check_input(x)
        positive = x > 0
        return np.where(positive, x, np.float32(0.0)), positive

    def backward(self, cache, grad):
        return np.where(cache, grad, np.float32(0.0)), {}


class SignActivation(Layer):
    """Maps inputs to +1/-1; the backward pass is the hard-tanh straight-through estimator."""

    def forward(self, x, *, params, buffers, filters, train, threads=1):
        self.check_input(x)
        return sign_activation_forward(x), x

    def backward(self, cache, grad):
        return sign_activation_backward(cache, grad), {}


class SoftmaxXent(Layer):
    """Softmax cross-entropy loss on the logits of the previous layer."""

    def infer_output_shape(self, input_shape):
        if len(input_shape) != 1:
            raise ShapeError(
                f"Error layer '{self.name}' expects flat logits, got shape {input_shape}")
        return input_shape

    def loss(self, logits, targets):
        """
        Return the mean cross-entropy and its gradient with respect to the logits.

        The loss is computed in float64 and returned as a python float.
        """
        logits = np.asarray(logits, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.int64).reshape(-1)
        if logits.ndim != 2 or logits.shape[0] != targets.size:
            raise ShapeError(
                f"Error {targets.size} targets do not match logits of shape {logits.shape}")
        if targets.size == 0:
            raise InputError("Error cannot compute a loss on an empty batch")
        if targets.min() < 0 or targets.max() >= logits.shape[1]:
            raise ShapeError(
                f"Error targets must lie in [0, {logits.shape[1]}), "
                f"got [{targets.min()}, {targets.max()}]")
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_p = shifted - log_z
        rows = np.arange(targets.size)
        loss = float(-log_p[rows, targets].mean())
        grad = np.exp(log_p)
        grad[rows, targets] -= 1.0
        return loss, (grad / targets.size).astype(np.float32)

    def forward(self, x, *, params, buffers, filters, train, threads=1):
        return x, None

    def backward(self, cache, grad):
        return grad, {}
