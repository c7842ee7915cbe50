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
import logging

import numpy as np

from dabnet.data.dataset import horizontal_flip
from dabnet.data.dataset import split_and_batch
from dabnet.errors import InputError
from dabnet.errors import NumericError
from dabnet.errors import ShapeError
from .network import binary_backward
from .network import binary_forward
from .network import infer
from .network import refresh_filters
from .optim import adam_update

logger = logging.getLogger('dabnet')

EVAL_BATCH_SIZE = 256


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    test_acc: float
    lr: float


def train_step(config, state, batch, targets, hyper):
    """
    One training step: binarize, forward, backward, restore the shadow weights, Adam.

    The given state is updated in place and returned with the batch loss.
    """
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if np.shape(batch)[0] != targets.size:
        raise ShapeError(
            f"Error batch of {np.shape(batch)[0]} samples has {targets.size} targets")
    logits, cache = binary_forward(config, state, batch, threads=hyper.threads)
    loss, loss_grad = config.loss_layer.loss(logits, targets)
    if not np.isfinite(loss):
        raise NumericError(f"Error non-finite loss at step {state.step + 1}")
    gradients = binary_backward(
        config, state, cache, loss_grad,
        grad_mode=hyper.grad_mode, ste_indicator=hyper.ste_indicator)

    # Copy back the real weights; the binarized ones never reach the parameters.
    for layer_name, snapshot in cache.snapshots.items():
        state.params[layer_name]['weight'] = snapshot

    state.step += 1
    lr = state.lr
    for layer_name, layer_grads in gradients.items():
        for param_name, grad in layer_grads.items():
            w, m, v = adam_update(
                state.params[layer_name][param_name], grad,
                state.adam_m[layer_name][param_name], state.adam_v[layer_name][param_name],
                state.step, lr,
                beta1=hyper.adam_beta1, beta2=hyper.adam_beta2, eps=hyper.adam_eps)
            state.params[layer_name][param_name] = w
            state.adam_m[layer_name][param_name] = m
            state.adam_v[layer_name][param_name] = v
    return state, loss


def score(config, state, dataset, *, threads=1):
    """Return ``(mean loss, top-1 accuracy)`` of the inference network on ``dataset``."""
    if len(dataset) == 0:
        raise InputError("Error cannot evaluate on an empty dataset")
    correct = 0
    total_loss = 0.0
    for images, labels in split_and_batch(dataset, EVAL_BATCH_SIZE):
        logits = infer(config, state, images, threads=threads)
        loss, _ = config.loss_layer.loss(logits, labels)
        total_loss += loss * labels.size
        correct += int((logits.argmax(axis=1) == labels).sum())
    return total_loss / len(dataset), correct / len(dataset)


def evaluate(config, state, dataset, *, threads=1):
    """Top-1 accuracy in ``[0, 1]``; binarized layers only use their stored filters."""
    return score(config, state, dataset, threads=threads)[1]


def fit(config, state, train_set, test_set, hyper, *, on_epoch=None, capture=None):
    """
    Train for ``hyper.epochs`` epochs and return the list of EpochRecord.

    After every epoch the inference filters are refreshed, the test split is scored and
    the learning rate schedule observes the test loss. ``capture`` (a TrajectoryLog)
    is given the state at epoch 0 and after every epoch; it never changes the state.
    """
    refresh_filters(config, state, threads=hyper.threads)
    if capture is not None:
        capture.capture_epoch(state, 0)
    history = []
    for epoch in range(1, hyper.epochs + 1):
        flip_rng = np.random.default_rng([hyper.seed, epoch, 1])
        lr = state.lr
        losses = []
        for images, labels in split_and_batch(
                train_set, hyper.batch_size, shuffle_seed=[hyper.seed, epoch]):
            if hyper.augment_flip:
                images = horizontal_flip(images, flip_rng)
            state, loss = train_step(config, state, images, labels, hyper)
            losses.append(loss)
        refresh_filters(config, state, threads=hyper.threads)
        test_loss, test_acc = score(config, state, test_set, threads=hyper.threads)
        next_lr = state.schedule.observe(test_loss)
        record = EpochRecord(
            epoch=epoch, train_loss=float(np.mean(losses)), test_acc=test_acc, lr=lr)
        history.append(record)
        logger.info(
            f"Epoch {epoch}/{hyper.epochs}: train_loss={record.train_loss:.4f} "
            f"test_loss={test_loss:.4f} test_acc={test_acc:.4f} lr={lr:g}")
        if next_lr < lr:
            logger.info(f"Learning rate decayed to {next_lr:g}.")
        if capture is not None:
            capture.capture_epoch(state, epoch)
        if on_epoch is not None:
            on_epoch(record)
    return history
