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

import argparse
import csv

import numpy as np
import pytest
import yaml

from dabnet.binarizer import condition_weights
from dabnet.data import generate_sketches
from dabnet.data import write_idx
from dabnet.diagnostics import FILTER_FIELDS
from dabnet.diagnostics import read_trajectory_csv
from dabnet.errors import ConfigError
from dabnet.errors import exit_code_for
from dabnet.errors import FormatError
from dabnet.errors import NumericError
from dabnet.errors import ShapeError
from dabnet.errors import UsageError
from dabnet.main import main
from dabnet.nn import init_state
from dabnet.nn import network_config_for_arch
from dabnet.nn import refresh_filters
from dabnet.verbs.bench import impl as bench_verb
from dabnet.verbs.common import read_manifest
from dabnet.verbs.common import sha256_of_file
from dabnet.verbs.eval import impl as eval_verb
from dabnet.verbs.inspect import impl as inspect_verb
from dabnet.verbs.train import impl as train_verb

SMALL_RUN = [
    '--arch', 'mlp', '--mode', 'fbin', '--size', '16', '--per-class', '4',
    '--test-per-class', '3', '--epochs', '2', '--batch', '8',
]


def run_verb(verb, args):
    parser = argparse.ArgumentParser()
    verb.prepare_arguments(parser)
    return verb.main(parser.parse_args([str(a) for a in args]))


def printed(capsys, key):
    lines = capsys.readouterr().out.splitlines()
    values = [line.split('=', 1)[1] for line in lines if line.startswith(key + '=')]
    assert len(values) == 1
    return values[0]


@pytest.fixture(scope='module')
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp('runs') / 'run'
    assert run_verb(train_verb, SMALL_RUN + ['--out', out]) == 0
    return out


def test_exit_codes():
    assert exit_code_for(UsageError('x')) == 2
    assert exit_code_for(ConfigError('x')) == 2
    assert exit_code_for(NumericError('x')) == 3
    assert exit_code_for(FormatError('x')) == 4
    assert exit_code_for(FileNotFoundError('x')) == 4
    assert exit_code_for(ShapeError('x')) == 1
    assert exit_code_for(RuntimeError('x')) == 1


@pytest.mark.parametrize('args', [
    ['--mode', 'fprec', '--scheme', 'dab'],
    ['--scheme', 'xnor'],
    ['--binarize-last'],
    ['--config', 'net.yaml', '--mode', 'wbin'],
    ['--mode', 'wbin', '--threads', '0'],
    ['--mode', 'wbin', '--capture-filters', '-1'],
    ['--data', 'mnist'],
    ['--data', 'idx:a,b,c'],
    ['--epochs', '-1'],
])
def test_train_usage_errors(tmp_path, args):
    assert run_verb(train_verb, args + ['--out', tmp_path / 'run']) == 2


def test_train_debug_raises(tmp_path):
    with pytest.raises(UsageError):
        run_verb(train_verb, ['--scheme', 'dab', '--debug', '--out', tmp_path])


def test_train_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('DAB_SEED', 'abc')
    assert run_verb(train_verb, SMALL_RUN + ['--out', tmp_path / 'a']) == 2
    monkeypatch.setenv('DAB_SEED', '7')
    assert run_verb(train_verb, SMALL_RUN + ['--epochs', '0', '--out', tmp_path / 'b']) == 0
    assert read_manifest(tmp_path / 'b').seed == 7


def test_train_writes_a_run_directory(small_run):
    for name in ('model.dabn', 'manifest.yaml', 'metrics.csv', 'trajectory.csv'):
        assert (small_run / name).is_file()
    with open(small_run / 'metrics.csv', newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['epoch', 'train_loss', 'test_acc', 'lr']
    assert [row[0] for row in rows[1:]] == ['1', '2']
    manifest = read_manifest(small_run)
    assert manifest.model_sha256 == sha256_of_file(small_run / 'model.dabn')
    assert manifest.hyperparams['epochs'] == 2
    assert manifest.data['size'] == 16
    assert set(manifest.dataset_fingerprints) == {'train', 'test'}
    attic = next(yaml.safe_load_all((small_run / 'manifest.yaml').read_text()))
    assert attic == {'type': 'dabnet run manifest', 'version': 1}
    assert len(read_trajectory_csv(small_run / 'trajectory.csv')) == 3 * 16


def test_train_prints_final_accuracy(tmp_path, capsys):
    out = tmp_path / 'run'
    assert run_verb(train_verb, SMALL_RUN + ['--out', out]) == 0
    accuracy = printed(capsys, 'test_acc')
    with open(out / 'metrics.csv', newline='') as f:
        assert list(csv.reader(f))[-1][2] == accuracy


def test_train_is_deterministic(tmp_path, small_run):
    out = tmp_path / 'again'
    assert run_verb(train_verb, SMALL_RUN + ['--out', out]) == 0
    assert sha256_of_file(out / 'model.dabn') == sha256_of_file(small_run / 'model.dabn')


def test_train_on_idx_files(tmp_path):
    paths = []
    for split, seed in (('train', 1), ('test', 2)):
        data = generate_sketches(per_class=2, size=16, seed=seed, split=split)
        images, labels = tmp_path / f'{split}-images.gz', tmp_path / f'{split}-labels.gz'
        write_idx(data, images, labels)
        paths += [images, labels]
    spec = 'idx:' + ','.join(str(p) for p in paths)
    args = ['--arch', 'convnet', '--data', spec, '--epochs', '1', '--out', tmp_path / 'run']
    assert run_verb(train_verb, args) == 0
    test_spec = 'idx:' + ','.join(str(p) for p in paths[2:])
    args = ['--model', tmp_path / 'run' / 'model.dabn', '--data', test_spec]
    assert run_verb(eval_verb, args) == 0


def test_eval_matches_training_metrics(small_run, capsys):
    assert run_verb(eval_verb, ['--run', small_run]) == 0
    accuracy = printed(capsys, 'accuracy')
    with open(small_run / 'metrics.csv', newline='') as f:
        assert list(csv.reader(f))[-1][2] == accuracy


def test_eval_errors(tmp_path, small_run, caplog):
    assert run_verb(eval_verb, ['--model', tmp_path / 'missing.dabn']) == 4
    data = bytearray((small_run / 'model.dabn').read_bytes())
    data[len(data) // 2] ^= 0x01
    corrupted = tmp_path / 'corrupted.dabn'
    corrupted.write_bytes(bytes(data))
    assert run_verb(eval_verb, ['--model', corrupted]) == 4
    assert 'CRC' in caplog.text
    assert run_verb(eval_verb, []) == 2
    assert run_verb(eval_verb, ['--model', corrupted, '--run', small_run]) == 2
    args = ['--model', small_run / 'model.dabn', '--size', '24']
    assert run_verb(eval_verb, args) == 1


def test_inspect_writes_filter_table(tmp_path, small_run):
    out = tmp_path / 'filters.csv'
    assert run_verb(inspect_verb, ['--run', small_run, '--out', out]) == 0
    with open(out, newline='') as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == FILTER_FIELDS
    assert len(rows) == 1 + 256 + 256
    assert {row[0] for row in rows[1:]} == {'fc2', 'fc3'}
    assert all(0 < float(row[4]) < 1 for row in rows[1:])
    trajectory = tmp_path / 'filters.trajectory.csv'
    assert len(read_trajectory_csv(trajectory)) == 3 * 16


def test_inspect_to_stdout(small_run, capsys):
    assert run_verb(inspect_verb, ['--model', small_run / 'model.dabn']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ','.join(FILTER_FIELDS)
    assert len(lines) == 1 + 512


def test_inspect_missing_model(tmp_path):
    assert run_verb(inspect_verb, ['--model', tmp_path / 'nothing.dabn']) == 4


def test_xnor_k_norm_is_the_nonnegative_fraction():
    config = network_config_for_arch('mlp', mode='wbin', scheme='xnor', size=16)
    state = init_state(config)
    refresh_filters(config, state)
    rows = list(inspect_verb.filter_rows(config, state))
    w = condition_weights(state.w_real('fc2'))
    fc2 = [row for row in rows if row[0] == 'fc2']
    for row, weights in zip(fc2, w):
        assert float(row[4]) == pytest.approx(np.mean(weights >= 0))


def test_bench_ksearch(capsys):
    assert run_verb(bench_verb, ['--kernel', 'kseach', '--sizes', '64', '1024',
                                 '--repeats', '1']) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == 'size,median_seconds'
    assert out[1].startswith('64,')
    assert any(line.startswith('growth_exponent=') for line in out)
    assert any(line.startswith('time_ratio_1024_64=') for line in out)


def test_bench_gemm(capsys):
    args = ['--kernel', 'gemm', '--sizes', '8x128x4', '--repeats', '1', '--threads', '2']
    assert run_verb(bench_verb, args) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == 'size,dab_gemm_seconds,reference_seconds,speedup'
    assert out[1].startswith('8x128x4,')
    assert float(out[1].split(',')[3]) > 0


@pytest.mark.parametrize('args', [
    ['--kernel', 'gemm', '--sizes', '8x128'],
    ['--kernel', 'ksearch', '--sizes', 'many'],
    ['--kernel', 'ksearch', '--sizes', '1'],
    ['--kernel', 'ksearch', '--repeats', '0'],
])
def test_bench_usage_errors(args):
    assert run_verb(bench_verb, args) == 2


def test_bench_helpers():
    assert bench_verb.parse_gemm_shape('64X4096x256') == (64, 4096, 256)
    assert bench_verb.growth_exponent([10, 100, 1000], [1, 100, 10000]) == pytest.approx(2.0)
    assert bench_verb.median_time(lambda: None, 3) >= 0.0


def test_command_without_a_verb(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main([])
    assert exc_info.value.code == 2
    assert 'No verb provided' in capsys.readouterr().err
