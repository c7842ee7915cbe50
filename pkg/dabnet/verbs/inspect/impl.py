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

import csv
import logging
import os
import sys

from dabnet.diagnostics import FILTER_FIELDS
from dabnet.diagnostics import read_trajectory_csv
from dabnet.diagnostics import write_trajectory_csv
from dabnet.diagnostics import write_trajectory_rows
from dabnet.model_io import load_model
from ..common import add_debug_argument
from ..common import model_path_from_options
from ..common import run_verb
from ..common import TRAJECTORY_FILE_NAME

logging.basicConfig(format='[%(name)s] [%(levelname)s] %(message)s', level=logging.INFO)
logger = logging.getLogger('dabnet')


def prepare_arguments(parser):
    parser.add_argument('--model', help='path to a DABN model file')
    parser.add_argument('--run', help='training run directory')
    parser.add_argument(
        '--out',
        default='-',
        help="CSV file for the filter table, '-' for stdout",
    )
    parser.add_argument(
        '--trajectory-out',
        help="CSV file for the per-epoch trajectories of a --run "
             "(default: next to --out with a '.trajectory.csv' suffix)",
    )
    add_debug_argument(parser)
    return parser


def main(options):
    return run_verb(main_impl, options)


def filter_rows(config, state):
    """One ``(layer, filter, n, K, K_norm, alpha, beta)`` row per binarized filter."""
    for layer in config.binarized_layers:
        for index, f in enumerate(state.filters[layer.name]):
            yield (layer.name, index, f.n, f.k, repr(f.k_norm), repr(f.alpha), repr(f.beta))


def _write_rows(rows, stream):
    writer = csv.writer(stream)
    writer.writerow(FILTER_FIELDS)
    count = 0
    for row in rows:
        writer.writerow(row)
        count += 1
    return count


def _trajectory_path(options):
    if options.trajectory_out is not None:
        return options.trajectory_out
    if options.out == '-':
        return None
    return os.path.splitext(options.out)[0] + '.trajectory.csv'


def main_impl(options):
    model_path = model_path_from_options(options)
    config, state = load_model(model_path)
    rows = filter_rows(config, state)
    if options.out == '-':
        count = _write_rows(rows, sys.stdout)
    else:
        with open(options.out, 'w', newline='') as f:
            count = _write_rows(rows, f)
        logger.info(f"Wrote {count} filter rows to '{options.out}'.")
    if count == 0:
        logger.warning(f"Model '{model_path}' has no binarized layers.")

    if options.run is None:
        return
    trajectory_path = _trajectory_path(options)
    source = os.path.join(options.run, TRAJECTORY_FILE_NAME)
    if trajectory_path is None:
        logger.info("No --trajectory-out given for stdout output, skipping trajectories.")
        return
    if not os.path.exists(source):
        logger.warning(f"Run '{options.run}' has no captured trajectories.")
        return
    records = read_trajectory_csv(source)
    if trajectory_path == '-':
        write_trajectory_rows(records, sys.stdout)
    else:
        write_trajectory_csv(records, trajectory_path)
