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

import numpy as np
import pytest
import yaml

from dabnet.binarize_grad import GradMode
from dabnet.binarizer import Scheme
from dabnet.errors import ConfigError
from dabnet.errors import InputError
from dabnet.errors import NumericError
from dabnet.errors import ShapeError
from dabnet.errors import StateError
from dabnet.nn import binary_backward
from dabnet.nn import binary_forward
from dabnet.nn import BinMode
from dabnet.nn import infer
from dabnet.nn import init_state
from dabnet.nn import network_config_for_arch
from dabnet.nn import parse_network_yaml
from dabnet.nn import refresh_filters
from dabnet.nn.config import NetworkContext
from dabnet.nn.layers import BatchNorm
from dabnet.nn.layers import MaxPool
from dabnet.nn.layers import ReLU
from dabnet.nn.layers import SignActivation
from dabnet.nn.layers import SoftmaxXent

LOSS = {'softmax_xent': {'name': 'loss'}}


def config_yaml(layers, input_shape, class_count):
    body = {
        'settings': {'input_shape': list(input_shape), 'class_count': class_count},
        'layers': layers,
    }
    return yaml.safe_dump_all([{'type': 'dabnet config', 'version': 1}, body])


def network(layers, input_shape=(4,), class_count=2):
    return parse_network_yaml(config_yaml(layers, input_shape, class_count), NetworkContext())


def loss_of(config, state, x, y, condition=True):
    logits, _ = binary_forward(config, state, x, condition=condition)
    return config.loss_layer.loss(logits, y)[0]


def check_finite_differences(config, state, x, y, gradients, layer, param, *,
                             h, rel, abs_tol, indices=None, condition=True):
    values = state.params[layer][param]
    flat = values.reshape(-1)
    indices = range(flat.size) if indices is None else indices
    for i in indices:
        original = flat[i]
        flat[i] = original + h
        plus = loss_of(config, state, x, y, condition)
        flat[i] = original - h
        minus = loss_of(config, state, x, y, condition)
        flat[i] = original
        numeric = (plus - minus) / (2 * h)
        analytic = gradients[layer][param].reshape(-1)[i]
        assert analytic == pytest.approx(numeric, rel=rel, abs=abs_tol), (layer, param, i)


@pytest.mark.parametrize('text,message', [
    ('type: dabnet config\nversion: 1\n', 'two sections'),
    ('type: other\nversion: 1\n---\n{}\n', "type: 'dabnet config'"),
    ('type: dabnet config\nversion: 2\n---\n{}\n', 'only version 1'),
    ('type: dabnet config\nversion: 1\n---\n[]\n', 'second section'),
    ('type: dabnet config\nversion: 1\n---\nlayers: []\n', "'settings'"),
    ('type: dabnet config\nversion: 1\n---\nsettings: {}\n', "'layers'"),
    ('type: dabnet config\nversion: 1\n---\n{a: [\n', 'Error parsing'),
])
def test_parse_network_yaml_document_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_network_yaml(text, NetworkContext())


@pytest.mark.parametrize('layers,message', [
    ([{'dense': {'name': 'fc', 'units': 2}, 'relu': {'name': 'r'}}, LOSS], 'exactly one key'),
    ([{'lstm': {'name': 'fc'}}, LOSS], 'unknown layer kind'),
    ([{'dense': {'units': 2}}, LOSS], "without 'name'"),
    ([{'dense': {'name': 'fc', 'units': 2, 'dropout': 0.5}}, LOSS], "does not support key"),
    ([{'dense': {'name': 'fc', 'units': 0}}, LOSS], "'units'"),
    ([{'dense': {'name': 'fc', 'units': 2, 'mode': 'ternary'}}, LOSS], 'unknown mode'),
    ([{'dense': {'name': 'fc', 'units': 2, 'mode': 'wbin', 'scheme': 'x'}}, LOSS],
     'unknown scheme'),
    ([{'dense': {'name': 'fc', 'units': 2, 'scheme': 'dab'}}, LOSS], 'full precision'),
    ([{'dense': {'name': 'fc', 'units': 2, 'mode': 'fbin'}}, LOSS], 'sign_activation'),
    ([{'dense': {'name': 'fc', 'units': 2}}], 'must end with'),
    ([{'dense': {'name': 'loss', 'units': 2}}, LOSS], 'duplicate'),
    ([LOSS, {'dense': {'name': 'fc', 'units': 2}}, {'softmax_xent': {'name': 'l2'}}],
     'must be the last layer'),
    ([{'maxpool': {'name': 'p', 'kernel': 2, 'stride': 1}}, LOSS], 'stride equal'),
])
def test_parse_network_yaml_layer_errors(layers, message):
    with pytest.raises(ConfigError, match=message):
        network(layers)


def test_shape_errors_are_reported_statically():
    with pytest.raises(ShapeError):
        network([{'dense': {'name': 'fc', 'units': 3}}, LOSS], class_count=2)
    with pytest.raises(ShapeError):
        network([{'conv2d': {'name': 'c', 'out_channels': 2, 'kernel': 3}}, LOSS])
    with pytest.raises(ShapeError):
        network(
            [{'maxpool': {'name': 'p', 'kernel': 2}}, {'dense': {'name': 'fc', 'units': 2}},
             LOSS],
            input_shape=(1, 5, 5))


def test_built_in_architectures():
    config = network_config_for_arch('convnet', mode='fbin', scheme='xnor', size=16)
    assert [layer.name for layer in config.binarized_layers] == ['conv2', 'conv3']
    assert all(layer.scheme is Scheme.XNOR for layer in config.binarized_layers)
    assert all(layer.bin_mode is BinMode.FBIN for layer in config.binarized_layers)
    assert isinstance(config.layer('act2'), SignActivation)
    assert config.layer('conv1').bin_mode is BinMode.FPREC
    assert config.layer('conv1').output_shape == (16, 16, 16)
    assert config.layer('pool3').output_shape == (64, 2, 2)
    assert config.layer('fc').bin_mode is BinMode.FPREC
    assert not config.layer('conv2').use_bias

    config = network_config_for_arch('mlp', mode='wbin', size=8, binarize_last=True)
    assert [layer.name for layer in config.binarized_layers] == ['fc2', 'fc3', 'out']
    assert isinstance(config.layer('act1'), ReLU)
    assert config.layer('out').output_shape == (4,)

    config = network_config_for_arch('convnet', size=8, class_count=3)
    assert config.binarized_layers == []
    assert config.loss_layer.output_shape == (3,)

    with pytest.raises(ConfigError):
        network_config_for_arch('resnet')
    with pytest.raises(ValueError):
        network_config_for_arch('mlp', mode='fancy')


def test_config_yaml_round_trip():
    config = network_config_for_arch('convnet', mode='wbin', scheme='bnn', size=8)
    again = parse_network_yaml(config.to_yaml(), NetworkContext())
    assert [layer.name for layer in again.layers] == [layer.name for layer in config.layers]
    modes = [layer.bin_mode for layer in config.layers]
    assert [layer.bin_mode for layer in again.layers] == modes
    assert again.to_yaml() == config.to_yaml()


def test_fprec_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    config = network([{'dense': {'name': 'fc', 'units': 2}}, LOSS], input_shape=(3,))
    state = init_state(config)
    state.params['fc']['bias'] = np.array([0.1, -0.2], dtype=np.float32)
    x = rng.standard_normal((5, 3)).astype(np.float32)
    y = np.array([0, 1, 1, 0, 1])
    logits, cache = binary_forward(config, state, x)
    _, loss_grad = config.loss_layer.loss(logits, y)
    gradients = binary_backward(config, state, cache, loss_grad)
    assert sum(g.size for g in gradients['fc'].values()) == 8
    for param in ('weight', 'bias'):
        check_finite_differences(
            config, state, x, y, gradients, 'fc', param, h=1e-2, rel=1e-3, abs_tol=5e-5)


def test_conv_batchnorm_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    config = network([
        {'conv2d': {'name': 'conv', 'out_channels': 2, 'kernel': 3, 'padding': 1}},
        {'batchnorm': {'name': 'bn'}},
        {'dense': {'name': 'fc', 'units': 3}},
        LOSS,
    ], input_shape=(1, 4, 4), class_count=3)
    state = init_state(config)
    x = rng.standard_normal((6, 1, 4, 4)).astype(np.float32)
    y = np.array([0, 1, 2, 0, 1, 2])
    logits, cache = binary_forward(config, state, x)
    _, loss_grad = config.loss_layer.loss(logits, y)
    gradients = binary_backward(config, state, cache, loss_grad)
    np.testing.assert_allclose(gradients['conv']['bias'], 0.0, atol=1e-6)
    check_finite_differences(
        config, state, x, y, gradients, 'conv', 'weight', h=1e-2, rel=5e-3, abs_tol=5e-4)
    for param in ('gamma', 'beta'):
        check_finite_differences(
            config, state, x, y, gradients, 'bn', param, h=1e-2, rel=5e-3, abs_tol=5e-4)
    check_finite_differences(
        config, state, x, y, gradients, 'fc', 'weight', h=1e-2, rel=5e-3, abs_tol=5e-4,
        indices=range(0, 96, 7))


def test_wbin_dense_uses_two_value_weights_exactly():
    config = network([{'dense': {'name': 'fc', 'units': 2, 'mode': 'wbin'}}, LOSS])
    state = init_state(config)
    weights = np.array([[5, 1, 1, 1], [1, 5, 1, 1]], dtype=np.float32)
    state.params['fc']['weight'] = weights.copy()
    x = np.random.default_rng(2).standard_normal((3, 4)).astype(np.float32)
    logits, cache = binary_forward(config, state, x, condition=False)
    np.testing.assert_allclose(logits, x @ weights.T, rtol=1e-6)
    assert state.filters['fc'][0].k == 1
    np.testing.assert_array_equal(cache.snapshots['fc'], weights)


def test_binary_forward_conditions_shadow_weights():
    config = network([{'dense': {'name': 'fc', 'units': 3, 'mode': 'wbin'}}, LOSS],
                     class_count=3)
    state = init_state(config)
    state.params['fc']['weight'] = state.params['fc']['weight'] * 10 + 3
    x = np.ones((2, 4), dtype=np.float32)
    _, cache = binary_forward(config, state, x)
    w = state.w_real('fc')
    assert np.abs(w).max() <= 1.0
    np.testing.assert_array_equal(cache.snapshots['fc'], w)


@pytest.mark.parametrize('scheme', ['dab', 'xnor', 'bnn'])
def test_fbin_equals_wbin_on_sign_inputs(scheme):
    rng = np.random.default_rng(3)

    def layers(mode):
        return [
            {'sign_activation': {'name': 'sign'}},
            {'dense': {'name': 'fc', 'units': 3, 'mode': mode, 'scheme': scheme}},
            LOSS,
        ]

    fbin = network(layers('fbin'), input_shape=(70,), class_count=3)
    wbin = network(layers('wbin'), input_shape=(70,), class_count=3)
    fbin_state, wbin_state = init_state(fbin), init_state(wbin)
    x = rng.standard_normal((5, 70)).astype(np.float32)
    fbin_logits, _ = binary_forward(fbin, fbin_state, x)
    wbin_logits, _ = binary_forward(wbin, wbin_state, x)
    np.testing.assert_allclose(fbin_logits, wbin_logits, rtol=1e-5, atol=1e-5)


def test_fbin_conv_equals_wbin_conv_without_padding():
    rng = np.random.default_rng(4)

    def layers(mode):
        return [
            {'sign_activation': {'name': 'sign'}},
            {'conv2d': {'name': 'conv', 'out_channels': 3, 'kernel': 3, 'mode': mode}},
            {'dense': {'name': 'fc', 'units': 2}},
            LOSS,
        ]

    fbin = network(layers('fbin'), input_shape=(2, 5, 5))
    wbin = network(layers('wbin'), input_shape=(2, 5, 5))
    fbin_state, wbin_state = init_state(fbin), init_state(wbin)
    x = rng.standard_normal((4, 2, 5, 5)).astype(np.float32)
    fbin_logits, _ = binary_forward(fbin, fbin_state, x)
    wbin_logits, _ = binary_forward(wbin, wbin_state, x)
    np.testing.assert_allclose(fbin_logits, wbin_logits, rtol=1e-4, atol=1e-4)


def test_zero_loss_gradient_gives_zero_gradients():
    config = network_config_for_arch('mlp', mode='wbin', size=8)
    state = init_state(config)
    x = np.random.default_rng(5).standard_normal((4, 1, 8, 8)).astype(np.float32)
    logits, cache = binary_forward(config, state, x)
    gradients = binary_backward(config, state, cache, np.zeros_like(logits))
    assert set(gradients) >= {'fc1', 'fc2', 'fc3', 'out', 'bn1'}
    for layer_grads in gradients.values():
        for grad in layer_grads.values():
            assert not np.any(grad)


def test_wbin_projection_gradients_match_finite_differences():
    rng = np.random.default_rng(6)
    config = network([{'dense': {'name': 'fc', 'units': 2, 'mode': 'wbin'}}, LOSS],
                     input_shape=(6,))
    state = init_state(config)
    state.params['fc']['weight'] = np.array([
        [0.9, 0.8, 0.85, -0.1, 0.0, 0.1],
        [-0.05, 0.05, 0.0, -0.9, -0.8, -0.95],
    ], dtype=np.float32)
    x = rng.standard_normal((8, 6)).astype(np.float32)
    y = rng.integers(0, 2, 8)
    logits, cache = binary_forward(config, state, x, condition=False)
    _, loss_grad = config.loss_layer.loss(logits, y)
    gradients = binary_backward(
        config, state, cache, loss_grad, grad_mode=GradMode.PROJECTION)
    masks = [f.mask_e for f in state.filters['fc']]
    check_finite_differences(
        config, state, x, y, gradients, 'fc', 'weight',
        h=1e-2, rel=1e-3, abs_tol=1e-4, condition=False)
    assert [f.mask_e for f in state.filters['fc']] == masks


def test_backward_and_inference_state_errors():
    config = network([
        {'sign_activation': {'name': 'sign'}},
        {'dense': {'name': 'fc', 'units': 2, 'mode': 'fbin'}},
        LOSS,
    ])
    state = init_state(config)
    x = np.ones((2, 4), dtype=np.float32)
    with pytest.raises(StateError):
        binary_backward(config, state, None, np.zeros((2, 2)))
    with pytest.raises(StateError):
        infer(config, state, x)
    refresh_filters(config, state)
    assert infer(config, state, x).shape == (2, 2)
    with pytest.raises(ShapeError):
        infer(config, state, np.ones((2, 5), dtype=np.float32))
    with pytest.raises(NumericError):
        binary_forward(config, state, np.full((2, 4), np.nan, dtype=np.float32))


def test_maxpool_layer():
    pool = MaxPool('maxpool', {'name': 'p', 'kernel': 2}, NetworkContext())
    assert pool.resolve((1, 4, 4)) == (1, 2, 2)
    x = np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4)
    y, cache = pool.forward(x, params={}, buffers={}, filters=None, train=True)
    assert y.tolist() == [[[[5, 7], [13, 15]]]]
    dx, grads = pool.backward(cache, np.ones_like(y))
    assert grads == {}
    assert dx.sum() == 4
    assert dx[0, 0, 1, 1] == dx[0, 0, 3, 3] == 1


def test_batchnorm_layer():
    bn = BatchNorm('batchnorm', {'name': 'bn'}, NetworkContext())
    bn.resolve((3,))
    params, buffers = bn.init_params(None), bn.init_buffers()
    x = np.array([[1, 2, 3], [3, 4, 5]], dtype=np.float32)
    y, _ = bn.forward(x, params=params, buffers=buffers, filters=None, train=False)
    np.testing.assert_allclose(y, x / np.sqrt(1 + 1e-5), rtol=1e-6)
    y, _ = bn.forward(x, params=params, buffers=buffers, filters=None, train=True)
    np.testing.assert_allclose(y, [[-1, -1, -1], [1, 1, 1]], rtol=1e-4)
    np.testing.assert_allclose(buffers['running_mean'], [0.2, 0.3, 0.4], rtol=1e-6)
    # Running variance uses the unbiased estimate: 0.9 * 1 + 0.1 * 2.
    np.testing.assert_allclose(buffers['running_var'], [1.1, 1.1, 1.1], rtol=1e-6)
    with pytest.raises(ConfigError):
        BatchNorm('batchnorm', {'name': 'bn', 'momentum': 0}, NetworkContext())


def test_softmax_xent_loss():
    layer = SoftmaxXent('softmax_xent', {'name': 'loss'}, NetworkContext())
    loss, grad = layer.loss(np.zeros((2, 2)), [0, 1])
    assert loss == pytest.approx(np.log(2))
    np.testing.assert_allclose(grad, [[-0.25, 0.25], [0.25, -0.25]])
    with pytest.raises(ShapeError):
        layer.loss(np.zeros((2, 2)), [0, 2])
    with pytest.raises(ShapeError):
        layer.loss(np.zeros((2, 2)), [0])
    with pytest.raises(InputError):
        layer.loss(np.zeros((0, 2)), [])
