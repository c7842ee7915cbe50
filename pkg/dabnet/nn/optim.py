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
import math

import numpy as np

from dabnet.errors import ShapeError


def adam_update(w, grad, m, v, t, lr, *, beta1=0.9, beta2=0.999, eps=1e-8):
    """
    Apply one bias-corrected Adam step to ``w``.

    ``t`` is the 1-based step count. No weight decay is applied.

    :return: a tuple of the updated weights and the two updated moments.
    """
    if not (w.shape == grad.shape == m.shape == v.shape):
        raise ShapeError(
            f"Error Adam shapes differ: weights {tuple(w.shape)}, gradient {tuple(grad.shape)}, "
            f"moments {tuple(m.shape)} and {tuple(v.shape)}")
    grad = grad.astype(np.float64)
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    w = w - lr * m_hat / (np.sqrt(v_hat) + eps)
    return w.astype(np.float32), m, v


@dataclass
class PlateauSchedule:
    """
    Step decay of the learning rate on a validation-loss plateau.

    After ``patience`` epochs without a new best validation loss the rate is divided
    by ``factor``; it never drops below ``lr_min``.
    """

    lr_max: float = 0.002
    lr_min: float = 0.00005
    factor: float = 2.0
    patience: int = 2
    decays: int = 0
    best_loss: float = math.inf
    bad_epochs: int = 0

    @property
    def lr(self):
        return max(self.lr_max / self.factor ** self.decays, self.lr_min)

    def observe(self, validation_loss):
        """Record one epoch's validation loss and return the learning rate to use next."""
        if validation_loss < self.best_loss:
            self.best_loss = validation_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.decays += 1
                self.bad_epochs = 0
        return self.lr
