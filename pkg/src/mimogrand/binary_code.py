"""Systematic random linear codes over GF(2).

Words are packed into Python integers, most significant bit first, so bit 0 of
a word (the first transmitted bit) is the highest set position and integer
order coincides with lexicographic order of the bit strings.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

ORACLE_MAX_N = 24
ORACLE_MAX_K = 16


class CodeParameterError(ValueError):
    """Invalid code dimensions or word lengths."""


@dataclass(frozen=True)
class BitWord:
    value: int
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise CodeParameterError("BitWord length must be positive")
        if self.value < 0 or self.value >> self.length:
            raise CodeParameterError(f"value does not fit in {self.length} bits")

    @classmethod
    def zeros(cls, length: int) -> BitWord:
        return cls(0, length)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> BitWord:
        bits = [int(b) for b in bits]
        value = 0
        for b in bits:
            if b not in (0, 1):
                raise CodeParameterError(f"not a bit: {b}")
            value = (value << 1) | b
        return cls(value, len(bits))

    @classmethod
    def from_str(cls, s: str) -> BitWord:
        return cls(int(s, 2), len(s))

    def bits(self) -> np.ndarray:
        shifts = np.arange(self.length - 1, -1, -1)
        if self.length <= 63:
            return ((self.value >> shifts) & 1).astype(np.uint8)
        return np.array([(self.value >> int(s)) & 1 for s in shifts], dtype=np.uint8)

    @property
    def weight(self) -> int:
        return self.value.bit_count()

    def _check(self, other: BitWord):
        if self.length != other.length:
            raise CodeParameterError(f"length mismatch: {self.length} vs {other.length}")

    def __xor__(self, other: BitWord) -> BitWord:
        self._check(other)
        return BitWord(self.value ^ other.value, self.length)

    def distance(self, other: BitWord) -> int:
        self._check(other)
        return (self.value ^ other.value).bit_count()

    def __getitem__(self, i: int) -> int:
        if not -self.length <= i < self.length:
            raise IndexError(i)
        i %= self.length
        return (self.value >> (self.length - 1 - i)) & 1

    def slice(self, start: int, stop: int) -> BitWord:
        """Bits ``start..stop-1`` as a new word."""
        if not 0 <= start < stop <= self.length:
            raise CodeParameterError(f"bad slice {start}:{stop} of length {self.length}")
        width = stop - start
        return BitWord((self.value >> (self.length - stop)) & ((1 << width) - 1), width)

    def __len__(self) -> int:
        return self.length

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b")


def _pack_rows(mat: np.ndarray) -> list[int]:
    return [BitWord.from_bits(row).value for row in mat]


@dataclass(frozen=True, eq=False)
class SystematicCode:
    """Binary (n, k) code with generator ``[I_k | P]`` and parity check ``[P^T | I_{n-k}]``."""

    k: int
    n: int
    seed: int
    parity_block: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0 < self.k < self.n:
            raise CodeParameterError(f"need 0 < k < n, got k={self.k}, n={self.n}")
        if self.parity_block.shape != (self.k, self.n - self.k):
            raise CodeParameterError("parity block has wrong shape")
        self.parity_block.setflags(write=False)

    @property
    def rate(self) -> float:
        return self.k / self.n

    @cached_property
    def generator(self) -> np.ndarray:
        g = np.concatenate([np.eye(self.k, dtype=np.uint8), self.parity_block], axis=1)
        g.setflags(write=False)
        return g

    @cached_property
    def parity_check(self) -> np.ndarray:
        h = np.concatenate([self.parity_block.T, np.eye(self.n - self.k, dtype=np.uint8)], axis=1)
        h.setflags(write=False)
        return h

    @cached_property
    def _parity_rows(self) -> list[int]:
        # row i of P packed as an (n-k)-bit integer
        return _pack_rows(self.parity_block)

    @cached_property
    def column_syndromes(self) -> np.ndarray:
        """Syndrome contributed by each single bit position, packed into uint64."""
        if self.n - self.k > 64:
            raise CodeParameterError("packed syndromes support n - k <= 64")
        cols = _pack_rows(self.parity_check.T)
        out = np.array(cols, dtype=np.uint64)
        out.setflags(write=False)
        return out

    @property
    def fingerprint(self) -> str:
        """Short hash of P, stored next to (k, n, seed) in golden fixtures."""
        return hashlib.sha256(np.packbits(self.parity_block).tobytes()).hexdigest()[:16]


def generate_rlc(k: int, n: int, seed: int) -> SystematicCode:
    if not 0 < k < n:
        raise CodeParameterError(f"need 0 < k < n, got k={k}, n={n}")
    rng = np.random.Generator(np.random.Philox(seed))
    p = rng.integers(0, 2, size=(k, n - k), dtype=np.uint8)
    return SystematicCode(k=k, n=n, seed=seed, parity_block=p)


def _as_word(y: BitWord | Sequence[int] | np.ndarray) -> BitWord:
    return y if isinstance(y, BitWord) else BitWord.from_bits(y)


def encode(code: SystematicCode, a: BitWord | Sequence[int]) -> BitWord:
    a = _as_word(a)
    if a.length != code.k:
        raise CodeParameterError(f"message length {a.length} != k={code.k}")
    parity = 0
    rows = code._parity_rows
    v = a.value
    for i in range(code.k):
        if (v >> (code.k - 1 - i)) & 1:
            parity ^= rows[i]
    r = code.n - code.k
    return BitWord((v << r) | parity, code.n)


def encode_many(code: SystematicCode, messages: np.ndarray) -> np.ndarray:
    """Row-wise encoding of a (batch, k) 0/1 array into (batch, n)."""
    messages = np.asarray(messages, dtype=np.uint8)
    if messages.shape[-1] != code.k:
        raise CodeParameterError("message length mismatch")
    parity = (messages.astype(np.int64) @ code.parity_block) & 1
    return np.concatenate([messages, parity.astype(np.uint8)], axis=-1)


def syndrome(code: SystematicCode, y: BitWord | Sequence[int]) -> BitWord:
    y = _as_word(y)
    if y.length != code.n:
        raise CodeParameterError(f"word length {y.length} != n={code.n}")
    r = code.n - code.k
    info = y.value >> r
    s = y.value & ((1 << r) - 1)
    rows = code._parity_rows
    for i in range(code.k):
        if (info >> (code.k - 1 - i)) & 1:
            s ^= rows[i]
    return BitWord(s, r)


def is_codeword(code: SystematicCode, y: BitWord | Sequence[int]) -> bool:
    return syndrome(code, y).value == 0


@dataclass(frozen=True)
class CosetLeaderTable:
    n: int
    leaders: dict[int, BitWord]

    def __len__(self) -> int:
        return len(self.leaders)

    def __getitem__(self, s: BitWord) -> BitWord:
        return self.leaders[s.value]

    def decode(self, code: SystematicCode, y: BitWord) -> BitWord:
        return y ^ self[syndrome(code, y)]


def build_coset_leader_table(code: SystematicCode) -> CosetLeaderTable:
    """Minimum-weight leader for every syndrome (test oracle, small n only).

    Within a weight class, candidates are visited in increasing integer value,
    which is lexicographic order of the bit strings, so the first word seen for
    a syndrome is its leader.
    """
    if code.n > ORACLE_MAX_N:
        raise CodeParameterError(f"coset leader table refused for n={code.n} > {ORACLE_MAX_N}")
    n, r = code.n, code.n - code.k
    leaders: dict[int, BitWord] = {}
    for w in range(n + 1):
        words = sorted(sum(1 << (n - 1 - i) for i in c) for c in combinations(range(n), w))
        for v in words:
            s = syndrome(code, BitWord(v, n)).value
            if s not in leaders:
                leaders[s] = BitWord(v, n)
        if len(leaders) == 1 << r:
            break
    return CosetLeaderTable(n=n, leaders=leaders)


def ml_decode_oracle(code: SystematicCode, y: BitWord | Sequence[int]) -> BitWord:
    """Exhaustive minimum-Hamming-distance decoding; ties go to the smallest codeword."""
    y = _as_word(y)
    if code.k > ORACLE_MAX_K:
        raise CodeParameterError(f"exhaustive decoding refused for k={code.k} > {ORACLE_MAX_K}")
    if y.length != code.n:
        raise CodeParameterError(f"word length {y.length} != n={code.n}")
    best = None
    best_d = code.n + 1
    for m in range(1 << code.k):
        c = encode(code, BitWord(m, code.k))
        d = c.distance(y)
        if d < best_d or (d == best_d and c.value < best.value):
            best, best_d = c, d
    return best
