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

from dataclasses import dataclass
from dataclasses import field

import numpy as np

from dabnet.binarize_grad import GradMode
from dabnet.errors import ConfigError
from .optim import PlateauSchedule


@dataclass
class Hyperparams:
    lr_max: float = 0.002
    lr_min: float = 0.00005
    lr_decay_factor: float = 2.0
    plateau_patience: int = 2
    batch_size: int = 64
    epochs: int = 15
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 1
    grad_mode: GradMode = GradMode.CLOSED_FORM
    ste_indicator: bool = False
    augment_flip: bool = True
    threads: int = 1

    def __post_init__(self):
        self.grad_mode = GradMode(self.grad_mode)
        if not 0.0 < self.lr_min <= self.lr_max:
            raise ConfigError(
                f"Error learning rates need 0 < lr_min <= lr_max, "
                f"got lr_min={self.lr_min} lr_max={self.lr_max}")
        if self.lr_decay_factor <= 1.0:
            raise ConfigError(f"Error lr_decay_factor must exceed 1, got {self.lr_decay_factor}")
        for name in ('plateau_patience', 'batch_size', 'threads'):
            if getattr(self, name) < 1:
                raise ConfigError(f"Error {name} must be at least 1, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ConfigError(f"Error epochs must not be negative, got {self.epochs}")

    def schedule(self):
        return PlateauSchedule(
            lr_max=self.lr_max, lr_min=self.lr_min, factor=self.lr_decay_factor,
            patience=self.plateau_patience)

    def to_dict(self):
        values = dict(self.__dict__)
        values['grad_mode'] = self.grad_mode.value
        return values


def _zeros_like(tree):
    return {
        layer: {name: np.zeros(value.shape, dtype=np.float64) for name, value in params.items()}
        for layer, params in tree.items()
    }


@dataclass
class TrainState:
    """
    Everything that evolves during training.

    ``params`` maps layer names to parameter arrays; for binarized layers ``'weight'``
    holds the shadow real weights. ``filters`` maps binarized layer names to their
    current list of BinarizedFilter, which is all inference needs for those layers.
    """

    params: dict
    buffers: dict
    filters: dict = field(default_factory=dict)
    adam_m: dict = None
    adam_v: dict = None
    step: int = 0
    schedule: PlateauSchedule = field(default_factory=PlateauSchedule)
    seed: int = 1

    def __post_init__(self):
        if self.adam_m is None:
            self.adam_m = _zeros_like(self.params)
        if self.adam_v is None:
            self.adam_v = _zeros_like(self.params)

    @property
    def lr(self):
        return self.schedule.lr

    def w_real(self, layer_name):
        return self.params[layer_name]['weight']


def init_state(config, hyper=None):
    """Initialize parameters, buffers and optimizer state for ``config``."""
    hyper = hyper or Hyperparams()
    rng = np.random.default_rng(hyper.seed)
    params = {}
    buffers = {}
    for layer in config.layers:
        layer_params = layer.init_params(rng)
        if layer_params:
            params[layer.name] = layer_params
        layer_buffers = layer.init_buffers()
        if layer_buffers:
            buffers[layer.name] = layer_buffers
    return TrainState(params=params, buffers=buffers, schedule=hyper.schedule(), seed=hyper.seed)
