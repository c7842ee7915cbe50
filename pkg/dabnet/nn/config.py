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

import logging

import yaml

from dabnet.binarizer import Scheme
from dabnet.errors import ConfigError
from dabnet.errors import ShapeError
from .layers import BatchNorm
from .layers import BinMode
from .layers import Conv2d
from .layers import Dense
from .layers import MaxPool
from .layers import ReLU
from .layers import SignActivation
from .layers import SoftmaxXent
from .layers import WeightLayer

logger = logging.getLogger('dabnet')

ARCHITECTURES = ('convnet', 'mlp')

DEFAULT_CONVNET_CONFIG = """\
## Network configuration generated by dabnet for the 'convnet' architecture.

## This 'attic section' self-documents this file's type and version.
type: 'dabnet config'
version: 1

---

settings:
    input_shape: [1, {size}, {size}]
    class_count: {class_count}
    loss: softmax_xent
layers:
    ## Each entry has exactly one key, the layer kind; its value holds the layer settings.
    ## The first layer sees the raw image and always stays full precision.
    - conv2d: {{name: conv1, out_channels: 16, kernel: 3, padding: 1}}
    - batchnorm: {{name: bn1}}
    - relu: {{name: act1}}
    - maxpool: {{name: pool1, kernel: 2}}

    - batchnorm: {{name: bn2}}
    - {activation}: {{name: act2}}
    - conv2d: {{name: conv2, out_channels: 32, kernel: 3, padding: 1{binarization}}}
    - maxpool: {{name: pool2, kernel: 2}}

    - batchnorm: {{name: bn3}}
    - {activation}: {{name: act3}}
    - conv2d: {{name: conv3, out_channels: 64, kernel: 3, padding: 1{binarization}}}
    - maxpool: {{name: pool3, kernel: 2}}

    - batchnorm: {{name: bn4}}
    - dense: {{name: fc, units: {class_count}{last_binarization}}}
    - softmax_xent: {{name: loss}}
"""

DEFAULT_MLP_CONFIG = """\
## Network configuration generated by dabnet for the 'mlp' architecture.

## This 'attic section' self-documents this file's type and version.
type: 'dabnet config'
version: 1

---

settings:
    input_shape: [1, {size}, {size}]
    class_count: {class_count}
    loss: softmax_xent
layers:
    - dense: {{name: fc1, units: 256}}
    - batchnorm: {{name: bn1}}
    - {activation}: {{name: act1}}
    - dense: {{name: fc2, units: 256{binarization}}}
    - batchnorm: {{name: bn2}}
    - {activation}: {{name: act2}}
    - dense: {{name: fc3, units: 256{binarization}}}
    - batchnorm: {{name: bn3}}
    - dense: {{name: out, units: {class_count}{last_binarization}}}
    - softmax_xent: {{name: loss}}
"""

_TEMPLATES = {
    'convnet': DEFAULT_CONVNET_CONFIG,
    'mlp': DEFAULT_MLP_CONFIG,
}


class NetworkContext:
    """Where a network configuration came from, used in error messages."""

    def __init__(self, *, configuration_file_path='<generated>'):
        self.configuration_file_path = configuration_file_path


def create_layer_by_name(layer_kind, *, layer_dict, network_context):
    layers = {
        'batchnorm': BatchNorm,
        'conv2d': Conv2d,
        'dense': Dense,
        'maxpool': MaxPool,
        'relu': ReLU,
        'sign_activation': SignActivation,
        'softmax_xent': SoftmaxXent,
    }
    layer_class = layers.get(layer_kind, None)
    if layer_class is None:
        layer_kinds = ', '.join(list(layers.keys()))
        raise ConfigError(
            f"Error unknown layer kind '{layer_kind}', supported layer kinds: [{layer_kinds}]")
    return layer_class(layer_kind, layer_dict, network_context)


class NetworkConfig:
    """
    An ordered list of layers plus the network-wide settings.

    Constructing a NetworkConfig resolves every layer's shapes, so a config that
    exists has passed :meth:`check_shapes`.
    """

    def __init__(self, *, settings, layers, network_context):
        self.network_context = network_context
        file_name = network_context.configuration_file_path
        try:
            self.input_shape = tuple(int(d) for d in settings['input_shape'])
            self.class_count = int(settings['class_count'])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(
                f"Error parsing file '{file_name}', 'settings' needs an 'input_shape' list "
                f"and an integer 'class_count'") from None
        self.loss_kind = settings.get('loss', 'softmax_xent')
        if self.loss_kind != 'softmax_xent':
            raise ConfigError(
                f"Error parsing file '{file_name}', unsupported loss '{self.loss_kind}', "
                f"supported losses: [softmax_xent]")
        self.settings = dict(settings)
        self.layers = list(layers)
        self.check_shapes()

    @property
    def weight_layers(self):
        return [layer for layer in self.layers if isinstance(layer, WeightLayer)]

    @property
    def binarized_layers(self):
        return [layer for layer in self.weight_layers if layer.binarized]

    @property
    def loss_layer(self):
        return self.layers[-1]

    @property
    def hidden_layers(self):
        """Every layer but the terminal loss layer."""
        return self.layers[:-1]

    def layer(self, name):
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def check_shapes(self):
        """Statically chain-check the layers; raises ConfigError or ShapeError."""
        file_name = self.network_context.configuration_file_path
        if not self.layers or not isinstance(self.layers[-1], SoftmaxXent):
            raise ConfigError(
                f"Error network in '{file_name}' must end with a 'softmax_xent' layer")
        names = [layer.name for layer in self.layers]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ConfigError(
                f"Error network in '{file_name}' has duplicate layer names: {duplicates}")
        shape = self.input_shape
        previous = None
        for layer in self.layers:
            if isinstance(layer, SoftmaxXent) and layer is not self.layers[-1]:
                raise ConfigError(
                    f"Error layer '{layer.name}': 'softmax_xent' must be the last layer")
            if layer.bin_mode is BinMode.FBIN and not isinstance(previous, SignActivation):
                raise ConfigError(
                    f"Error fbin layer '{layer.name}' must directly follow a "
                    f"'sign_activation' layer")
            shape = layer.resolve(shape)
            previous = layer
        if shape != (self.class_count,):
            raise ShapeError(
                f"Error network in '{file_name}' produces outputs of shape {shape}, "
                f"expected ({self.class_count},)")

    def to_yaml(self):
        """Render the configuration back into the two-section YAML format."""
        attic = {'type': 'dabnet config', 'version': 1}
        body = {
            'settings': {
                'input_shape': list(self.input_shape),
                'class_count': self.class_count,
                'loss': self.loss_kind,
            },
            'layers': [layer.to_entry() for layer in self.layers],
        }
        return yaml.safe_dump_all([attic, body], sort_keys=False)


def parse_network_yaml(yaml_string, network_context):
    """
    Parse a network configuration string, returning a checked NetworkConfig.

    :raises ConfigError: if the document is not a version 1 'dabnet config'.
    """
    file_name = network_context.configuration_file_path
    try:
        configs = list(yaml.load_all(yaml_string, Loader=yaml.SafeLoader))
    except yaml.YAMLError as e:
        raise ConfigError(f"Error parsing file '{file_name}': {e}") from e
    if len(configs) != 2:
        raise ConfigError(
            f"Error parsing file '{file_name}', "
            f"expected a YAML file with two sections, separated by '---', found {len(configs)}.")
    attic, config = configs
    if not isinstance(attic, dict) or attic.get('type') != 'dabnet config':
        raise ConfigError(
            f"Error parsing file '{file_name}', "
            f"expected the first section of the YAML file to have a \"type: 'dabnet config'\".")
    if attic.get('version') != 1:
        raise ConfigError(
            f"Error parsing file '{file_name}', "
            f"expected the first section of the YAML file to have a 'version' entry, "
            f"and only version 1 is supported.")
    if not isinstance(config, dict):
        raise ConfigError(
            f"Error parsing file '{file_name}', in the second section, "
            f"expected something like dict{{settings: <network settings>, layers: <layers>}}, "
            f"got a '{type(config)}' instead")

    settings_dict = config.get('settings')
    if not isinstance(settings_dict, dict):
        raise ConfigError(
            f"Error parsing file '{file_name}', in the second section, value 'settings', "
            f"expected a dict{{input_shape: [c, h, w], class_count: <int>, ...}}, "
            f"got a '{type(settings_dict)}' instead")

    layers_list = config.get('layers')
    if not isinstance(layers_list, list):
        raise ConfigError(
            f"Error parsing file '{file_name}', in the second section, value 'layers', "
            f"expected a list of layers, "
            f"got a '{type(layers_list)}' instead")

    layers = []
    for layer in layers_list:
        if not isinstance(layer, dict) or len(layer) != 1:
            raise ConfigError(
                f"Error parsing file '{file_name}', in the second section, each layer "
                f"must have exactly one key (which is the kind of layer to use)")
        layer_kind = next(iter(layer))
        layers.append(create_layer_by_name(
            layer_kind, layer_dict=layer[layer_kind], network_context=network_context))

    return NetworkConfig(settings=settings_dict, layers=layers, network_context=network_context)


def load_network_config(path):
    """Read and parse a network configuration file."""
    with open(path, 'r') as f:
        yaml_string = f.read()
    logger.debug(f"Parsing network configuration '{path}'.")
    return parse_network_yaml(yaml_string, NetworkContext(configuration_file_path=path))


def _binarization_entry(mode, scheme):
    if mode is BinMode.FPREC:
        return ''
    return f', mode: {mode.value}, scheme: {scheme.value}'


def network_config_for_arch(
    arch, *, mode=BinMode.FPREC, scheme=Scheme.DAB, size=32, class_count=4,
    binarize_last=False,
):
    """
    Build one of the built-in architectures.

    The first weight layer is always full precision; the last one is full precision
    unless ``binarize_last`` is set, in which case it is a wbin layer with ``scheme``.
    """
    if arch not in _TEMPLATES:
        raise ConfigError(
            f"Error unknown architecture '{arch}', supported architectures: "
            f"[{', '.join(ARCHITECTURES)}]")
    mode = BinMode(mode)
    scheme = Scheme(scheme)
    last_mode = BinMode.WBIN if binarize_last else BinMode.FPREC
    format_map = {
        'size': size,
        'class_count': class_count,
        'activation': 'sign_activation' if mode is BinMode.FBIN else 'relu',
        'binarization': _binarization_entry(mode, scheme),
        'last_binarization': _binarization_entry(last_mode, scheme),
    }
    yaml_string = _TEMPLATES[arch].format_map(format_map)
    context = NetworkContext(configuration_file_path=f'<built-in {arch}>')
    return parse_network_yaml(yaml_string, context)
