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

"""Per-epoch capture of (K, alpha, beta) for a fixed sample of binarized filters."""

import csv
from dataclasses import astuple
from dataclasses import dataclass
import logging

import numpy as np

from dabnet.binarizer import condition_weights
from dabnet.binarizer import filter_errors
from dabnet.binarizer import Scheme
from dabnet.errors import FormatError

logger = logging.getLogger('dabnet')

DEFAULT_SAMPLES_PER_LAYER = 8


@dataclass(frozen=True)
class TrajectoryRecord:
    epoch: int
    layer: str
    filter: int
    n: int
    k: int
    k_norm: float
    alpha: float
    beta: float
    xnor_alpha: float
    err_dab: float
    err_xnor: float


# CSV header; the inspect table uses the columns from layer to beta.
TRAJECTORY_FIELDS = (
    'epoch', 'layer', 'filter', 'n', 'K', 'K_norm', 'alpha', 'beta',
    'xnor_alpha', 'err_dab', 'err_xnor',
)
FILTER_FIELDS = TRAJECTORY_FIELDS[1:8]


class TrajectoryLog:
    """
    Append-only log of sampled filters, one record per (epoch, sampled filter).

    The sampled filter ids are drawn once, at construction, from ``seed``. Capturing
    only reads the training state.
    """

    def __init__(self, config, *, samples_per_layer=DEFAULT_SAMPLES_PER_LAYER, seed=1):
        rng = np.random.default_rng(seed)
        self.sampled = {}
        for layer in config.binarized_layers:
            count = layer.weight_shape[0]
            chosen = rng.choice(count, size=min(samples_per_layer, count), replace=False)
            self.sampled[layer.name] = sorted(int(i) for i in chosen)
        self.records = []

    def __len__(self):
        return len(self.records)

    def capture_epoch(self, state, epoch):
        for layer_name, ids in self.sampled.items():
            filters = state.filters.get(layer_name)
            if filters is None:
                logger.warning(f"No binarized filters for layer '{layer_name}' at epoch {epoch}.")
                continue
            w = condition_weights(state.w_real(layer_name))
            rows = w.reshape(w.shape[0], -1)
            for index in ids:
                f = filters[index]
                row = rows[index]
                errors = filter_errors(row, (Scheme.DAB, Scheme.XNOR))
                self.records.append(TrajectoryRecord(
                    epoch=epoch, layer=layer_name, filter=index, n=f.n, k=f.k,
                    k_norm=f.k_norm, alpha=f.alpha, beta=f.beta,
                    xnor_alpha=float(np.abs(row).mean(dtype=np.float64)),
                    err_dab=errors[Scheme.DAB], err_xnor=errors[Scheme.XNOR]))
        return self

    def write_csv(self, path):
        write_trajectory_csv(self.records, path)


def write_trajectory_rows(records, stream):
    writer = csv.writer(stream)
    writer.writerow(TRAJECTORY_FIELDS)
    for record in records:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in astuple(record)])


def write_trajectory_csv(records, path):
    with open(path, 'w', newline='') as f:
        write_trajectory_rows(records, f)
    logger.info(f"Wrote {len(records)} trajectory records to '{path}'.")


def read_trajectory_csv(path):
    with open(path, 'r', newline='') as f:
        reader = csv.reader(f)
        header = tuple(next(reader, ()))
        if header != TRAJECTORY_FIELDS:
            raise FormatError(f"Error '{path}' does not start with the trajectory header")
        records = []
        for row in reader:
            try:
                records.append(TrajectoryRecord(
                    int(row[0]), row[1], int(row[2]), int(row[3]), int(row[4]),
                    *(float(v) for v in row[5:])))
            except (IndexError, TypeError, ValueError) as e:
                raise FormatError(f"Error malformed trajectory row in '{path}': {row}") from e
    return records
