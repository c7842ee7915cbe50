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

import struct
import zlib

import numpy as np
import pytest
import yaml

from dabnet.errors import FormatError
from dabnet.errors import StateError
from dabnet.model_io import decode_model
from dabnet.model_io import encode_model
from dabnet.model_io import filter_record_size
from dabnet.model_io import load_model
from dabnet.model_io import save_model
from dabnet.nn import infer
from dabnet.nn import init_state
from dabnet.nn import network_config_for_arch
from dabnet.nn import parse_network_yaml
from dabnet.nn import refresh_filters
from dabnet.nn.config import NetworkContext


def trained_like(mode, scheme='dab'):
    config = network_config_for_arch('convnet', mode=mode, scheme=scheme, size=16)
    state = init_state(config)
    rng = np.random.default_rng(1)
    for name, buffers in state.buffers.items():
        buffers['running_mean'] = rng.normal(size=buffers['running_mean'].shape).astype('f4')
        buffers['running_var'] = rng.uniform(0.5, 2, buffers['running_var'].shape).astype('f4')
    refresh_filters(config, state)
    return config, state


def with_crc(body):
    return body + struct.pack('<I', zlib.crc32(body))


@pytest.mark.parametrize('mode,scheme', [
    ('fprec', 'dab'), ('wbin', 'dab'), ('fbin', 'dab'), ('fbin', 'xnor'), ('wbin', 'bnn')])
def test_round_trip_is_logit_identical(tmp_path, mode, scheme):
    config, state = trained_like(mode, scheme)
    path = tmp_path / 'run' / 'model.dabn'
    size = save_model(config, state, path)
    assert path.stat().st_size == size
    loaded_config, loaded_state = load_model(path)
    assert loaded_config.to_yaml() == config.to_yaml()
    probe = np.random.default_rng(2).random((100, 1, 16, 16)).astype(np.float32)
    expected = infer(config, state, probe)
    np.testing.assert_array_equal(infer(loaded_config, loaded_state, probe), expected)
    for layer in config.binarized_layers:
        assert layer.name not in loaded_state.params
        assert loaded_state.filters[layer.name] == state.filters[layer.name]


def test_file_layout():
    config, state = trained_like('wbin')
    data = encode_model(config, state)
    assert data[:4] == b'DABN'
    assert struct.unpack('<H', data[4:6]) == (1,)
    (config_length,) = struct.unpack('<I', data[6:10])
    attic, body = yaml.safe_load_all(data[10:10 + config_length].decode('utf-8'))
    assert attic == {'type': 'dabnet config', 'version': 1}
    assert [next(iter(entry)) for entry in body['layers']][:2] == ['conv2d', 'batchnorm']
    assert struct.unpack('<I', data[-4:]) == (zlib.crc32(data[:-4]),)
    assert encode_model(config, state) == data


def test_binarized_layer_compression():
    n = 512 * 3 * 3
    text = yaml.safe_dump_all([{'type': 'dabnet config', 'version': 1}, {
        'settings': {'input_shape': [512, 3, 3], 'class_count': 2},
        'layers': [
            {'conv2d': {'name': 'conv', 'out_channels': 8, 'kernel': 3, 'mode': 'wbin'}},
            {'dense': {'name': 'fc', 'units': 2}},
            {'softmax_xent': {'name': 'loss'}},
        ],
    }])
    config = parse_network_yaml(text, NetworkContext())
    assert config.layer('conv').fan_in == n
    state = init_state(config)
    refresh_filters(config, state)
    data = encode_model(config, state)
    config_length = struct.unpack('<I', data[6:10])[0]
    filter_bytes = 8 * filter_record_size(n)
    dense_bytes = 4 * (2 * 8 + 2)
    assert len(data) == 10 + config_length + filter_bytes + dense_bytes + 4
    assert filter_record_size(n) == 12 + 576
    assert (4 * n * 8) / filter_bytes >= 28


def test_version_and_magic_errors():
    config, state = trained_like('fbin')
    data = encode_model(config, state)
    with pytest.raises(FormatError, match='not a DABN'):
        decode_model(b'NOPE' + data[4:])
    with pytest.raises(FormatError, match='version 2'):
        decode_model(with_crc(data[:4] + struct.pack('<H', 2) + data[6:-4]))
    with pytest.raises(FormatError, match='truncated'):
        decode_model(data[:7])


def test_corruption_errors():
    config, state = trained_like('fbin')
    data = bytearray(encode_model(config, state))
    middle = len(data) // 2
    data[middle] ^= 0x40
    with pytest.raises(FormatError, match='CRC'):
        decode_model(bytes(data))
    version_flip = bytearray(encode_model(config, state))
    version_flip[4] ^= 0x02
    with pytest.raises(FormatError, match='CRC'):
        decode_model(bytes(version_flip))
    with pytest.raises(FormatError):
        decode_model(encode_model(config, state)[:-10])


def test_structural_errors_behind_a_valid_crc():
    config, state = trained_like('fbin')
    body = encode_model(config, state)[:-4]
    with pytest.raises(FormatError, match='trailing'):
        decode_model(with_crc(body + b'\0\0'))
    with pytest.raises(FormatError, match='truncated'):
        decode_model(with_crc(body[:-3]))
    (config_length,) = struct.unpack('<I', body[6:10])
    broken = body[:10] + b'x' * config_length + body[10 + config_length:]
    with pytest.raises(FormatError, match='configuration'):
        decode_model(with_crc(broken))


def test_invalid_filter_record():
    config, state = trained_like('fbin')
    body = bytearray(encode_model(config, state)[:-4])
    (config_length,) = struct.unpack('<I', body[6:10])
    # First record after the fprec conv1 and bn1: claim K = 0.
    offset = 10 + config_length + 4 * (16 * 9 + 16) + 4 * 4 * 16 + 4 * 4 * 16
    assert config.binarized_layers[0].name == 'conv2'
    body[offset:offset + 4] = struct.pack('<I', 0)
    with pytest.raises(FormatError, match='invalid filter 0'):
        decode_model(with_crc(bytes(body)))


def test_save_and_load_errors(tmp_path):
    config, state = trained_like('wbin')
    state.filters.clear()
    with pytest.raises(StateError):
        save_model(config, state, tmp_path / 'model.dabn')
    with pytest.raises(OSError):
        load_model(tmp_path / 'missing.dabn')
