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

"""Bit vectors packed least-significant-bit first into 64-bit words."""

from dataclasses import dataclass

import numpy as np

from dabnet.errors import EncodingError

WORD_BITS = 64


def word_count(n_bits):
    return -(-n_bits // WORD_BITS)


def byte_count(n_bits):
    return -(-n_bits // 8)


@dataclass(frozen=True, eq=False)
class PackedBits:
    """
    A length-tagged bit vector, or a stack of them.

    Bit ``i`` lives in bit ``i % 64`` of word ``i // 64``. ``words`` has the shape
    ``[..., word_count(n_bits)]``, so a 2-D ``words`` array is a packed matrix with
    one bit vector per row. Padding bits past ``n_bits`` are always zero, which
    lets popcounts run over whole words.
    """

    words: np.ndarray
    n_bits: int

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        object.__setattr__(self, 'words', words)
        object.__setattr__(self, 'n_bits', int(self.n_bits))
        if words.ndim < 1 or words.shape[-1] != word_count(self.n_bits):
            raise EncodingError(
                f"Error {self.n_bits} bits need {word_count(self.n_bits)} words per row, "
                f"got words of shape {tuple(words.shape)}")
        tail = self.n_bits % WORD_BITS
        if tail and words.size and np.any(words[..., -1] >> np.uint64(tail)):
            raise EncodingError(f"Error padding bits beyond bit {self.n_bits} are set")

    @classmethod
    def from_bools(cls, bits):
        bits = np.asarray(bits, dtype=bool)
        n_bits = bits.shape[-1]
        padding = word_count(n_bits) * WORD_BITS - n_bits
        if padding:
            pad_width = [(0, 0)] * (bits.ndim - 1) + [(0, padding)]
            bits = np.pad(bits, pad_width)
        packed = np.packbits(bits, axis=-1, bitorder='little')
        words = np.ascontiguousarray(packed).view('<u8').astype(np.uint64)
        return cls(words, n_bits)

    @classmethod
    def from_bytes(cls, data, n_bits):
        """Inverse of :meth:`to_bytes` for a single vector."""
        raw = np.frombuffer(data, dtype=np.uint8)
        if raw.size != byte_count(n_bits):
            raise EncodingError(
                f"Error {n_bits} bits need {byte_count(n_bits)} bytes, got {raw.size}")
        padded = np.zeros(word_count(n_bits) * 8, dtype=np.uint8)
        padded[:raw.size] = raw
        return cls(padded.view('<u8').astype(np.uint64), n_bits)

    def to_bools(self):
        raw = self.words.astype('<u8').view(np.uint8)
        return np.unpackbits(raw, axis=-1, count=self.n_bits, bitorder='little').astype(bool)

    def to_bytes(self):
        """Serialize a single vector to whole bytes, little-endian bit order."""
        if self.words.ndim != 1:
            raise EncodingError("Error only a single bit vector can be serialized")
        return self.words.astype('<u8').tobytes()[:byte_count(self.n_bits)]

    def popcount(self):
        counts = np.bitwise_count(self.words).sum(axis=-1, dtype=np.int64)
        return int(counts) if counts.ndim == 0 else counts

    def row(self, index):
        return PackedBits(self.words[index], self.n_bits)

    def __len__(self):
        return self.n_bits

    def __eq__(self, other):
        if not isinstance(other, PackedBits):
            return NotImplemented
        return self.n_bits == other.n_bits and np.array_equal(self.words, other.words)
