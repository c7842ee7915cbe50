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

from .dataset import Dataset
from .dataset import horizontal_flip
from .dataset import split_and_batch
from .idx import load_idx
from .idx import write_idx
from .sketches import generate_sketches
from .sketches import SKETCH_CLASSES

__all__ = [
    'Dataset',
    'generate_sketches',
    'horizontal_flip',
    'load_idx',
    'SKETCH_CLASSES',
    'split_and_batch',
    'write_idx',
]
