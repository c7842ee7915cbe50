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

from dabnet.errors import ShapeError
from dabnet.errors import UsageError
from dabnet.model_io import load_model
from dabnet.nn.train import evaluate
from ..common import add_debug_argument
from ..common import DataSettings
from ..common import load_data
from ..common import model_path_from_options
from ..common import read_manifest
from ..common import resolve_seed
from ..common import run_verb

logging.basicConfig(format='[%(name)s] [%(levelname)s] %(message)s', level=logging.INFO)
logger = logging.getLogger('dabnet')


def prepare_arguments(parser):
    parser.add_argument('--model', help='path to a DABN model file')
    parser.add_argument(
        '--run',
        help='training run directory; its model and data settings are used',
    )
    parser.add_argument(
        '--data',
        help="'synthetic' or 'idx:<test images>,<test labels>' "
             "(default: the run's data, else synthetic)",
    )
    parser.add_argument('--size', type=int, default=32, help='synthetic image size')
    parser.add_argument(
        '--test-per-class', type=int, default=125, help='synthetic test images per class')
    parser.add_argument(
        '--seed', type=int, default=1,
        help='seed of the synthetic training split; the test split uses seed + 1')
    parser.add_argument('--threads', type=int, default=1, help='worker threads for kernels')
    add_debug_argument(parser)
    return parser


def main(options):
    return run_verb(main_impl, options)


def data_settings_from_options(options):
    """The run manifest's data settings, overridden by an explicit ``--data``."""
    if options.run is not None and options.data is None:
        return read_manifest(options.run).data_settings()
    return DataSettings(
        spec=options.data or 'synthetic', size=options.size,
        test_per_class=options.test_per_class, seed=resolve_seed(options.seed))


def main_impl(options):
    if options.threads < 1:
        raise UsageError(f"Error --threads must be at least 1, got {options.threads}")
    model_path = model_path_from_options(options)
    config, state = load_model(model_path)
    _, test_set = load_data(data_settings_from_options(options), need_train=False)
    if test_set.image_shape != config.input_shape:
        raise ShapeError(
            f"Error model expects {config.input_shape} inputs, data has {test_set.image_shape}")
    accuracy = evaluate(config, state, test_set, threads=options.threads)
    logger.info(f"Evaluated '{model_path}' on {len(test_set)} images.")
    print(f'accuracy={accuracy!r}')
