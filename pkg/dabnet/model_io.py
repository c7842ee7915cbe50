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
The DABN model file.

Layout, all multi-byte values little-endian::

    b'DABN'                  magic
    u16                      format version (1)
    u32 + bytes              network configuration, UTF-8 YAML
    per layer with state, in network order:
        full precision       raw float32 weight (then bias when present)
        batchnorm            float32 gamma, beta, running mean, running variance
        binarized            per filter: u32 k, f32 alpha, f32 beta,
                             mask bits packed LSB-first into ceil(n / 8) bytes
    u32                      CRC32 of every preceding byte

Binarized layers store only their filters, never the shadow weights.
"""

import logging
import os
import struct
import zlib

import numpy as np

from dabnet.binarizer import BinarizedFilter
from dabnet.errors import ConfigError
from dabnet.errors import FormatError
from dabnet.errors import ShapeError
from dabnet.errors import StateError
from dabnet.nn.config import NetworkContext
from dabnet.nn.config import parse_network_yaml
from dabnet.nn.layers import BatchNorm
from dabnet.nn.layers import WeightLayer
from dabnet.nn.state import TrainState
from dabnet.packed_bits import byte_count
from dabnet.packed_bits import PackedBits

logger = logging.getLogger('dabnet')

MAGIC = b'DABN'
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)

_FILTER_HEADER = struct.Struct('<Iff')
_BATCHNORM_ARRAYS = (
    ('params', 'gamma'),
    ('params', 'beta'),
    ('buffers', 'running_mean'),
    ('buffers', 'running_var'),
)


def filter_record_size(n):
    return _FILTER_HEADER.size + byte_count(n)


def _float_bytes(array):
    return np.ascontiguousarray(array, dtype='<f4').tobytes()


def _layer_payload(layer, state):
    if layer.binarized:
        filters = state.filters.get(layer.name)
        if filters is None:
            raise StateError(f"Error layer '{layer.name}' has no binarized filters to save")
        return b''.join(
            _FILTER_HEADER.pack(f.k, f.alpha, f.beta) + f.mask_e.to_bytes() for f in filters)
    if isinstance(layer, BatchNorm):
        return b''.join(
            _float_bytes(getattr(state, group)[layer.name][name])
            for group, name in _BATCHNORM_ARRAYS)
    params = state.params.get(layer.name, {})
    return b''.join(_float_bytes(params[name]) for name in ('weight', 'bias') if name in params)


def encode_model(config, state):
    """Return the complete DABN bytes for ``config`` and the inference part of ``state``."""
    config_bytes = config.to_yaml().encode('utf-8')
    parts = [
        MAGIC,
        struct.pack('<H', FORMAT_VERSION),
        struct.pack('<I', len(config_bytes)),
        config_bytes,
    ]
    parts.extend(_layer_payload(layer, state) for layer in config.layers)
    body = b''.join(parts)
    return body + struct.pack('<I', zlib.crc32(body))


def save_model(config, state, path):
    """Write the model to ``path`` and return the number of bytes written."""
    data = encode_model(config, state)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(data)
    logger.info(f"Wrote model ({len(data)} bytes) to '{path}'.")
    return len(data)


class _Reader:

    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, count, what):
        end = self.offset + count
        if end > len(self.data):
            raise FormatError(
                f"Error model file '{self.path}' is truncated while reading {what}")
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def floats(self, shape, what):
        count = int(np.prod(shape))
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype='<f4').astype(np.float32).reshape(shape)


def _read_filters(reader, layer):
    filter_count = layer.weight_shape[0]
    n = layer.fan_in
    filters = []
    for index in range(filter_count):
        what = f"filter {index} of layer '{layer.name}'"
        k, alpha, beta = _FILTER_HEADER.unpack(reader.take(_FILTER_HEADER.size, what))
        try:
            mask = PackedBits.from_bytes(reader.take(byte_count(n), what), n)
            filters.append(BinarizedFilter(mask, k, alpha, beta, n, scheme=layer.scheme))
        except ValueError as e:
            raise FormatError(
                f"Error model file '{reader.path}' has an invalid {what}: {e}") from e
    return filters


def decode_model(data, path='<bytes>'):
    """Parse DABN bytes into ``(config, state)``; the state is ready for inference only."""
    if len(data) < len(MAGIC) + 2 + 4:
        raise FormatError(f"Error model file '{path}' is truncated")
    body, (stored_crc,) = data[:-4], struct.unpack('<I', data[-4:])
    reader = _Reader(body, path)
    magic = reader.take(len(MAGIC), 'the magic number')
    if magic != MAGIC:
        raise FormatError(f"Error '{path}' is not a DABN model file (magic {magic!r})")
    computed_crc = zlib.crc32(body)
    if computed_crc != stored_crc:
        raise FormatError(
            f"Error model file '{path}' failed its CRC check "
            f"(stored 0x{stored_crc:08x}, computed 0x{computed_crc:08x})")
    (version,) = reader.unpack('<H', 'the format version')
    if version not in SUPPORTED_VERSIONS:
        raise FormatError(
            f"Error model file '{path}' has format version {version}, "
            f"supported versions: {list(SUPPORTED_VERSIONS)}")
    (config_length,) = reader.unpack('<I', 'the configuration length')
    config_text = reader.take(config_length, 'the configuration')
    try:
        config = parse_network_yaml(
            config_text.decode('utf-8'), NetworkContext(configuration_file_path=path))
    except (ConfigError, ShapeError, UnicodeDecodeError) as e:
        raise FormatError(f"Error model file '{path}' has an invalid configuration: {e}") from e

    params, buffers, filters = {}, {}, {}
    for layer in config.layers:
        if layer.binarized:
            filters[layer.name] = _read_filters(reader, layer)
        elif isinstance(layer, BatchNorm):
            arrays = {'params': {}, 'buffers': {}}
            for group, name in _BATCHNORM_ARRAYS:
                arrays[group][name] = reader.floats(
                    (layer.channels,), f"{name} of layer '{layer.name}'")
            params[layer.name] = arrays['params']
            buffers[layer.name] = arrays['buffers']
        elif isinstance(layer, WeightLayer):
            params[layer.name] = {
                'weight': reader.floats(layer.weight_shape, f"weights of layer '{layer.name}'"),
            }
            if layer.use_bias:
                params[layer.name]['bias'] = reader.floats(
                    (layer.weight_shape[0],), f"bias of layer '{layer.name}'")
    if reader.offset != len(body):
        raise FormatError(
            f"Error model file '{path}' has {len(body) - reader.offset} unexpected trailing bytes")
    state = TrainState(params=params, buffers=buffers, filters=filters, adam_m={}, adam_v={})
    return config, state


def load_model(path):
    """Read a DABN file; OSError propagates when the file cannot be read."""
    with open(path, 'rb') as f:
        data = f.read()
    config, state = decode_model(data, path)
    logger.info(f"Loaded model with {len(config.layers)} layers from '{path}'.")
    return config, state
