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

from .config import network_config_for_arch
from .config import NetworkConfig
from .config import parse_network_yaml
from .layers import BinMode
from .network import binary_backward
from .network import binary_forward
from .network import infer
from .network import refresh_filters
from .optim import adam_update
from .state import Hyperparams
from .state import init_state
from .state import TrainState
from .train import evaluate
from .train import fit
from .train import train_step

__all__ = [
    'adam_update',
    'binary_backward',
    'binary_forward',
    'BinMode',
    'evaluate',
    'fit',
    'Hyperparams',
    'infer',
    'init_state',
    'network_config_for_arch',
    'NetworkConfig',
    'parse_network_yaml',
    'refresh_filters',
    'train_step',
    'TrainState',
]
