"""Fixed-length bit strings packed into 64-bit words.

Bit ``i`` of a string lives in word ``i // 64`` at position ``i % 64``.
Pad bits past the declared length are always zero, which keeps word-wise
XOR/popcount arithmetic exact.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, RangeError

WORD_BITS = 64
_WORD_MASK = (1 << WORD_BITS) - 1


class BitString:
    __slots__ = ("length", "words")

    def __init__(self, length: int, words):
        if length < 0:
            raise RangeError("bit length must be nonnegative")
        n_words = (length + WORD_BITS - 1) // WORD_BITS
        words = tuple(int(w) for w in words)
        if len(words) != n_words:
            raise DimensionError(f"expected {n_words} words for {length} bits, got {len(words)}")
        for w in words:
            if w < 0 or w > _WORD_MASK:
                raise RangeError("words must be unsigned 64-bit integers")
        tail = length % WORD_BITS
        if tail and words and words[-1] >> tail:
            raise RangeError("pad bits beyond the declared length must be zero")
        self.length = length
        self.words = words

    @classmethod
    def from_bits(cls, bits) -> "BitString":
        """Build from an iterable of 0/1 values, first bit first."""
        try:
            arr = np.fromiter((int(b) for b in bits), dtype=np.int64)
        except (TypeError, ValueError) as exc:
            raise RangeError(f"bits must be 0 or 1 ({exc})") from None
        if arr.size and not np.isin(arr, (0, 1)).all():
            bad = int(np.flatnonzero(~np.isin(arr, (0, 1)))[0])
            raise RangeError(f"bit {bad} is {arr[bad]!r}, expected 0 or 1")
        return cls.from_bit_array(arr.astype(np.uint8))

    @classmethod
    def from_bit_array(cls, arr: np.ndarray) -> "BitString":
        """Build from a uint8 0/1 array; the fast path for bulk hashing."""
        length = int(arr.size)
        n_words = (length + WORD_BITS - 1) // WORD_BITS
        padded = np.zeros(n_words * WORD_BITS, dtype=np.uint8)
        padded[:length] = arr
        packed = np.packbits(padded.reshape(-1, WORD_BITS), axis=1, bitorder="little")
        words = packed.copy().view("<u8").ravel()
        return cls(length, (int(w) for w in words))

    @classmethod
    def from_text(cls, text: str) -> "BitString":
        return cls.from_bits(int(c) for c in text.strip())

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> "BitString":
        """Inverse of :meth:`to_bytes`; bytes pack 8 bits MSB-first."""
        if len(data) != (length + 7) // 8:
            raise DimensionError(f"{length} bits need {(length + 7) // 8} bytes, got {len(data)}")
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:length]
        return cls.from_bit_array(bits)

    @classmethod
    def concat(cls, parts) -> "BitString":
        bits = []
        for p in parts:
            bits.extend(p.bits())
        return cls.from_bits(bits)

    def bits(self):
        """Bits as a list of ints, first bit first."""
        return [(self.words[i // WORD_BITS] >> (i % WORD_BITS)) & 1 for i in range(self.length)]

    def to_text(self) -> str:
        return "".join(str(b) for b in self.bits())

    def to_bytes(self) -> bytes:
        """Pack MSB-first per byte; trailing pad bits are zero."""
        if self.length == 0:
            return b""
        arr = np.array(self.bits(), dtype=np.uint8)
        return np.packbits(arr).tobytes()

    def complement(self) -> "BitString":
        tail = self.length % WORD_BITS
        out = [(~w) & _WORD_MASK for w in self.words]
        if tail and out:
            out[-1] &= (1 << tail) - 1
        return BitString(self.length, out)

    def __xor__(self, other: "BitString") -> "BitString":
        if self.length != other.length:
            raise DimensionError(f"bit lengths differ: {self.length} vs {other.length}")
        return BitString(self.length, [a ^ b for a, b in zip(self.words, other.words)])

    def __len__(self):
        return self.length

    def __eq__(self, other):
        return (
            isinstance(other, BitString)
            and self.length == other.length
            and self.words == other.words
        )

    def __hash__(self):
        return hash((self.length, self.words))

    def __repr__(self):
        shown = self.to_text() if self.length <= 32 else self.to_text()[:29] + "..."
        return f"BitString({self.length}, {shown})"
