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

"""Exceptions raised by dabnet, each carrying the exit code the CLI maps it to."""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_FORMAT = 4


class DabnetError(Exception):
    """Base class for all errors raised by dabnet."""

    exit_code = 1


class UsageError(DabnetError):
    exit_code = EXIT_USAGE


class ConfigError(DabnetError, ValueError):
    exit_code = EXIT_USAGE


class NumericError(DabnetError, ArithmeticError):
    exit_code = EXIT_NUMERIC


class FormatError(DabnetError, ValueError):
    exit_code = EXIT_FORMAT


class ShapeError(DabnetError, ValueError):
    pass


class BoundsError(ShapeError, IndexError):
    pass


class DegenerateInputError(DabnetError, ValueError):
    pass


class SizeError(DabnetError, ValueError):
    pass


class EncodingError(DabnetError, ValueError):
    pass


class StateError(DabnetError, RuntimeError):
    pass


class InputError(DabnetError, ValueError):
    pass


def exit_code_for(error):
    """Return the CLI exit code for the given exception."""
    if isinstance(error, DabnetError):
        return error.exit_code
    if isinstance(error, OSError):
        return EXIT_FORMAT
    return 1
