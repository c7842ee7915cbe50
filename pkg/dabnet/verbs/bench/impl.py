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
import time

import numpy as np

from dabnet.binarizer import binarize_filters
from dabnet.binarizer import find_optimal_k
from dabnet.binarizer import reconstruct
from dabnet.binarizer import Scheme
from dabnet.bitkernel import dab_gemm
from dabnet.bitkernel import pack_signs
from dabnet.errors import UsageError
from dabnet.tensor import reference_matmul
from ..common import add_debug_argument
from ..common import resolve_seed
from ..common import run_verb

logging.basicConfig(format='[%(name)s] [%(levelname)s] %(message)s', level=logging.INFO)
logger = logging.getLogger('dabnet')

# 'kseach' is accepted as a spelling of 'ksearch'.
KERNELS = ('ksearch', 'kseach', 'gemm')
DEFAULT_KSEARCH_SIZES = ('16384', '65536', '262144', '1048576')
DEFAULT_GEMM_SIZES = ('64x4096x256',)


def prepare_arguments(parser):
    parser.add_argument('--kernel', choices=KERNELS, required=True, help='kernel to time')
    parser.add_argument(
        '--sizes',
        nargs='+',
        help="filter lengths for ksearch, 'MxNxF' (rows x bits x filters) shapes for gemm",
    )
    parser.add_argument(
        '--repeats', type=int, default=9, help='timed repetitions; the median is reported')
    parser.add_argument('--seed', type=int, default=1, help='random seed of the inputs')
    parser.add_argument('--threads', type=int, default=1, help='worker threads for gemm')
    add_debug_argument(parser)
    return parser


def main(options):
    return run_verb(main_impl, options)


def median_time(function, repeats):
    """Median wall time of ``repeats`` calls, after one untimed warm-up call."""
    function()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        function()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def growth_exponent(sizes, times):
    """Slope of log(time) against log(size)."""
    slope, _ = np.polyfit(np.log(np.asarray(sizes, dtype=np.float64)),
                          np.log(np.asarray(times, dtype=np.float64)), 1)
    return float(slope)


def _parse_int(text):
    try:
        value = int(text)
    except ValueError:
        raise UsageError(f"Error invalid size '{text}'") from None
    if value < 2:
        raise UsageError(f"Error sizes must be at least 2, got {value}")
    return value


def parse_gemm_shape(text):
    parts = text.lower().split('x')
    if len(parts) != 3:
        raise UsageError(f"Error gemm sizes look like 'MxNxF', got '{text}'")
    return tuple(_parse_int(p) for p in parts)


def bench_ksearch(sizes, repeats, rng):
    times = []
    print('size,median_seconds')
    for n in sizes:
        w = rng.standard_normal(n).astype(np.float32)
        elapsed = median_time(lambda: find_optimal_k(w), repeats)
        times.append(elapsed)
        print(f'{n},{elapsed!r}')
    if len(sizes) >= 2:
        print(f'growth_exponent={growth_exponent(sizes, times)!r}')
    by_size = dict(zip(sizes, times))
    largest = max(sizes)
    if largest % 16 == 0 and largest // 16 in by_size:
        ratio = by_size[largest] / by_size[largest // 16]
        print(f'time_ratio_{largest}_{largest // 16}={ratio!r}')
    return times


def bench_gemm(shapes, repeats, rng, threads):
    print('size,dab_gemm_seconds,reference_seconds,speedup')
    speedups = []
    for m, n, count in shapes:
        inputs = np.where(rng.random((m, n)) < 0.5, -1.0, 1.0).astype(np.float32)
        filters = binarize_filters(
            rng.standard_normal((count, n)).astype(np.float32), Scheme.DAB)
        weights = np.stack([reconstruct(f) for f in filters])
        packed = pack_signs(inputs)
        fast = median_time(lambda: dab_gemm(packed, filters, threads=threads), repeats)
        slow = median_time(lambda: reference_matmul(inputs, weights.T), repeats)
        speedups.append(slow / fast)
        print(f'{m}x{n}x{count},{fast!r},{slow!r},{slow / fast!r}')
    return speedups


def main_impl(options):
    if options.repeats < 1:
        raise UsageError(f"Error --repeats must be at least 1, got {options.repeats}")
    rng = np.random.default_rng(resolve_seed(options.seed))
    if options.kernel == 'gemm':
        shapes = [parse_gemm_shape(s) for s in options.sizes or DEFAULT_GEMM_SIZES]
        bench_gemm(shapes, options.repeats, rng, options.threads)
    else:
        sizes = [_parse_int(s) for s in options.sizes or DEFAULT_KSEARCH_SIZES]
        bench_ksearch(sizes, options.repeats, rng)
