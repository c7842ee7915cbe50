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

"""Helpers shared by the dabnet verbs: error mapping, data selection and run manifests."""

from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
import hashlib
import logging
import os

import yaml

from dabnet import __version__
from dabnet.data import generate_sketches
from dabnet.data import load_idx
from dabnet.errors import exit_code_for
from dabnet.errors import EXIT_OK
from dabnet.errors import FormatError
from dabnet.errors import UsageError

logger = logging.getLogger('dabnet')

MODEL_FILE_NAME = 'model.dabn'
MANIFEST_FILE_NAME = 'manifest.yaml'
METRICS_FILE_NAME = 'metrics.csv'
TRAJECTORY_FILE_NAME = 'trajectory.csv'

SEED_ENVIRONMENT_VARIABLE = 'DAB_SEED'


def run_verb(main_impl, options):
    """
    Call ``main_impl(options)`` and map failures onto exit codes.

    With ``--debug`` the original exception propagates instead.
    """
    try:
        return main_impl(options) or EXIT_OK
    except Exception as e:
        if getattr(options, 'debug', False):
            raise
        logger.error(str(e))
        return exit_code_for(e)


def add_debug_argument(parser):
    parser.add_argument(
        '--debug',
        default=False,
        action='store_true',
        help='raise errors with their traceback instead of mapping them to exit codes',
    )


def resolve_seed(seed):
    """Return ``seed``, unless the DAB_SEED environment variable overrides it."""
    value = os.environ.get(SEED_ENVIRONMENT_VARIABLE)
    if value is None or value == '':
        return seed
    try:
        return int(value)
    except ValueError:
        raise UsageError(
            f"Error {SEED_ENVIRONMENT_VARIABLE} must be an integer, got '{value}'") from None


@dataclass
class DataSettings:
    """
    Where a run's data comes from.

    ``spec`` is ``synthetic`` or ``idx:`` followed by comma separated paths: either
    ``train_images,train_labels,test_images,test_labels`` or, for evaluation only,
    ``test_images,test_labels``.
    """

    spec: str = 'synthetic'
    size: int = 32
    per_class: int = 500
    test_per_class: int = 125
    seed: int = 1

    def idx_paths(self):
        paths = [p for p in self.spec[len('idx:'):].split(',') if p]
        if len(paths) not in (2, 4):
            raise UsageError(
                f"Error --data idx: expects 2 or 4 comma separated paths, got '{self.spec}'")
        return paths


def load_data(settings, *, need_train=True):
    """Return ``(train, test)`` datasets; ``train`` is None when not needed or not given."""
    if settings.spec == 'synthetic':
        test = generate_sketches(
            per_class=settings.test_per_class, size=settings.size, seed=settings.seed + 1,
            split='test')
        if not need_train:
            return None, test
        train = generate_sketches(
            per_class=settings.per_class, size=settings.size, seed=settings.seed)
        return train, test
    if not settings.spec.startswith('idx:'):
        raise UsageError(
            f"Error unknown --data '{settings.spec}', expected 'synthetic' or 'idx:<paths>'")
    paths = settings.idx_paths()
    if need_train and len(paths) != 4:
        raise UsageError("Error training needs --data idx:<train images>,<train labels>,"
                         "<test images>,<test labels>")
    test = load_idx(paths[-2], paths[-1], split='test')
    train = load_idx(paths[0], paths[1]) if need_train else None
    if train is not None and train.class_count != test.class_count:
        count = max(train.class_count, test.class_count)
        train.class_count = test.class_count = count
    return train, test


def sha256_of_file(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce (and re-evaluate) a training run."""

    network_config: str
    hyperparams: dict
    data: dict
    seed: int
    dataset_fingerprints: dict = field(default_factory=dict)
    model_sha256: str = ''
    dabnet_version: str = __version__

    def data_settings(self):
        return DataSettings(**self.data)

    def to_yaml(self):
        attic = {'type': 'dabnet run manifest', 'version': 1}
        return yaml.safe_dump_all([attic, asdict(self)], sort_keys=True)


def write_manifest(manifest, run_directory):
    path = os.path.join(run_directory, MANIFEST_FILE_NAME)
    with open(path, 'w') as f:
        f.write(manifest.to_yaml())
    logger.info(f"Wrote run manifest to '{path}'.")
    return path


def read_manifest(run_directory):
    path = os.path.join(run_directory, MANIFEST_FILE_NAME)
    with open(path, 'r') as f:
        text = f.read()
    try:
        documents = list(yaml.safe_load_all(text))
        attic, body = documents
        if attic.get('type') != 'dabnet run manifest' or attic.get('version') != 1:
            raise ValueError('unexpected type or version')
        return RunManifest(**body)
    except (ValueError, TypeError, AttributeError, yaml.YAMLError) as e:
        raise FormatError(f"Error parsing run manifest '{path}': {e}") from e


def model_path_from_options(options):
    """Resolve ``--model`` or ``--run`` into a model file path."""
    if options.model is not None and options.run is not None:
        raise UsageError("Error give either --model or --run, not both")
    if options.model is not None:
        return options.model
    if options.run is not None:
        return os.path.join(options.run, MODEL_FILE_NAME)
    raise UsageError("Error one of --model or --run is required")
