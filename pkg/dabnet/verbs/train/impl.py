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

from dabnet.binarize_grad import GradMode
from dabnet.binarizer import Scheme
from dabnet.diagnostics import DEFAULT_SAMPLES_PER_LAYER
from dabnet.diagnostics import TrajectoryLog
from dabnet.errors import ShapeError
from dabnet.errors import UsageError
from dabnet.model_io import save_model
from dabnet.nn.config import ARCHITECTURES
from dabnet.nn.config import load_network_config
from dabnet.nn.config import network_config_for_arch
from dabnet.nn.layers import BinMode
from dabnet.nn.network import refresh_filters
from dabnet.nn.state import Hyperparams
from dabnet.nn.state import init_state
from dabnet.nn.train import evaluate
from dabnet.nn.train import fit
from ..common import add_debug_argument
from ..common import DataSettings
from ..common import load_data
from ..common import MANIFEST_FILE_NAME
from ..common import METRICS_FILE_NAME
from ..common import MODEL_FILE_NAME
from ..common import resolve_seed
from ..common import run_verb
from ..common import RunManifest
from ..common import sha256_of_file
from ..common import TRAJECTORY_FILE_NAME
from ..common import write_manifest

logging.basicConfig(format='[%(name)s] [%(levelname)s] %(message)s', level=logging.INFO)
logger = logging.getLogger('dabnet')

METRICS_FIELDS = ('epoch', 'train_loss', 'test_acc', 'lr')


def prepare_arguments(parser):
    parser.add_argument(
        '--arch',
        choices=ARCHITECTURES,
        default='convnet',
        help='built-in architecture to train',
    )
    parser.add_argument(
        '--config',
        help='network configuration YAML file, used instead of --arch',
    )
    parser.add_argument(
        '--mode',
        choices=[m.value for m in BinMode],
        help='binarization mode of the hidden weight layers (default: fprec)',
    )
    parser.add_argument(
        '--scheme',
        choices=[s.value for s in Scheme],
        help='binarization scheme of binarized layers (default: dab)',
    )
    parser.add_argument(
        '--binarize-last',
        default=False,
        action='store_true',
        help='also binarize the weights of the last layer (wbin)',
    )
    parser.add_argument(
        '--data',
        default='synthetic',
        help="'synthetic' or 'idx:<train images>,<train labels>,<test images>,<test labels>'",
    )
    parser.add_argument('--size', type=int, default=32, help='synthetic image size')
    parser.add_argument(
        '--per-class', type=int, default=500, help='synthetic training images per class')
    parser.add_argument(
        '--test-per-class', type=int, default=125, help='synthetic test images per class')
    parser.add_argument('--epochs', type=int, default=15, help='number of epochs')
    parser.add_argument('--batch', type=int, default=64, help='batch size')
    parser.add_argument(
        '--seed', type=int, default=1, help='random seed (overridden by DAB_SEED)')
    parser.add_argument('--lr-max', type=float, default=0.002, help='initial learning rate')
    parser.add_argument('--lr-min', type=float, default=0.00005, help='learning rate floor')
    parser.add_argument(
        '--grad-mode',
        choices=[g.value for g in GradMode],
        default=GradMode.CLOSED_FORM.value,
        help='gradient of the DAB binarization',
    )
    parser.add_argument(
        '--ste',
        choices=['scaled', 'indicator'],
        default='scaled',
        help='straight-through estimator of the closed-form grad mode',
    )
    parser.add_argument(
        '--no-flip',
        default=False,
        action='store_true',
        help='disable horizontal flip augmentation',
    )
    parser.add_argument(
        '--capture-filters',
        type=int,
        default=DEFAULT_SAMPLES_PER_LAYER,
        help='filters per binarized layer whose K, alpha and beta are logged each epoch '
             '(0 disables)',
    )
    parser.add_argument(
        '--threads', type=int, default=1, help='worker threads for binarization and kernels')
    parser.add_argument(
        '--out',
        required=True,
        help='run directory for the model, manifest, metrics and trajectories',
    )
    add_debug_argument(parser)
    return parser


def main(options):
    return run_verb(main_impl, options)


def _check_options(options):
    if options.config is not None and (options.mode is not None or options.scheme is not None):
        raise UsageError("Error --mode and --scheme cannot be combined with --config")
    mode = BinMode(options.mode or BinMode.FPREC.value)
    if mode is BinMode.FPREC and options.scheme is not None:
        raise UsageError(f"Error --scheme {options.scheme} requires a binarized --mode")
    if mode is BinMode.FPREC and options.binarize_last:
        raise UsageError("Error --binarize-last requires a binarized --mode")
    if options.threads < 1:
        raise UsageError(f"Error --threads must be at least 1, got {options.threads}")
    if options.capture_filters < 0:
        raise UsageError("Error --capture-filters must not be negative")
    return mode, Scheme(options.scheme or Scheme.DAB.value)


def _network_config(options, mode, scheme, train_set):
    if options.config is not None:
        config = load_network_config(options.config)
    else:
        config = network_config_for_arch(
            options.arch, mode=mode, scheme=scheme, size=train_set.image_shape[-1],
            class_count=train_set.class_count, binarize_last=options.binarize_last)
    if config.input_shape != train_set.image_shape or config.class_count != train_set.class_count:
        raise ShapeError(
            f"Error network expects {config.input_shape} inputs and {config.class_count} "
            f"classes, data has {train_set.image_shape} images and "
            f"{train_set.class_count} classes")
    return config


def main_impl(options):
    mode, scheme = _check_options(options)
    seed = resolve_seed(options.seed)
    data_settings = DataSettings(
        spec=options.data, size=options.size, per_class=options.per_class,
        test_per_class=options.test_per_class, seed=seed)
    hyper = Hyperparams(
        lr_max=options.lr_max, lr_min=options.lr_min, batch_size=options.batch,
        epochs=options.epochs, seed=seed, grad_mode=GradMode(options.grad_mode),
        ste_indicator=options.ste == 'indicator', augment_flip=not options.no_flip,
        threads=options.threads)

    train_set, test_set = load_data(data_settings)
    config = _network_config(options, mode, scheme, train_set)
    state = init_state(config, hyper)

    capture = None
    if options.capture_filters and config.binarized_layers:
        capture = TrajectoryLog(config, samples_per_layer=options.capture_filters, seed=seed)

    os.makedirs(options.out, exist_ok=True)
    metrics_path = os.path.join(options.out, METRICS_FILE_NAME)
    logger.info(
        f"Training {len(config.layers)} layers on {len(train_set)} images "
        f"({len(config.binarized_layers)} binarized layers) into '{options.out}'.")
    with open(metrics_path, 'w', newline='') as metrics_file:
        writer = csv.writer(metrics_file)
        writer.writerow(METRICS_FIELDS)

        def on_epoch(record):
            writer.writerow([record.epoch, repr(record.train_loss), repr(record.test_acc),
                             repr(record.lr)])
            metrics_file.flush()

        history = fit(config, state, train_set, test_set, hyper, on_epoch=on_epoch,
                      capture=capture)

    if history:
        test_acc = history[-1].test_acc
    else:
        refresh_filters(config, state, threads=hyper.threads)
        test_acc = evaluate(config, state, test_set, threads=hyper.threads)

    model_path = os.path.join(options.out, MODEL_FILE_NAME)
    save_model(config, state, model_path)
    if capture is not None:
        capture.write_csv(os.path.join(options.out, TRAJECTORY_FILE_NAME))
    manifest = RunManifest(
        network_config=config.to_yaml(),
        hyperparams=hyper.to_dict(),
        data=vars(data_settings),
        seed=seed,
        dataset_fingerprints={
            'train': train_set.fingerprint(),
            'test': test_set.fingerprint(),
        },
        model_sha256=sha256_of_file(model_path))
    write_manifest(manifest, options.out)
    logger.info(f"Run written to '{options.out}' ({MANIFEST_FILE_NAME}, {MODEL_FILE_NAME}).")
    print(f'test_acc={test_acc!r}')
    print(f'model={model_path}')
