"""Bit-level and symbol-level GRAND, with optional reliability ordering.

Every decoder counts membership tests, the initial all-zero guess included.
Candidate syndromes are built in numpy blocks and scanned for the first hit, so
the query count equals the position of that hit in the enumeration order:

* bit level: weight 0, 1, ..., w_th; supports of equal weight in colexicographic
  order over the priority ranks (rank 0 = least reliable position).
* symbol level: structures in ranking order; for each, position subsets in
  colexicographic order over priority ranks, then which of the chosen slots carry
  the type-E2 strings (lexicographic), then the strings themselves (product
  order, each set sorted by integer value).

:func:`iter_bit_patterns` and :func:`iter_symbol_patterns` spell out the same
orders one pattern at a time and serve as the reference in tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from typing import Iterator, Sequence

import numpy as np

from .binary_code import BitWord, CodeParameterError, SystematicCode
from .error_model import ErrorStructure, StructureRanking
from .modulation import Constellation, ModulationError

CHUNK_ELEMENTS = 1 << 20


@dataclass(frozen=True)
class DecodeOutcome:
    codeword: BitWord | None
    queries: int
    k: int

    @property
    def decoded(self) -> bool:
        return self.codeword is not None

    @property
    def abandoned(self) -> bool:
        return self.codeword is None

    @property
    def info_bits(self) -> BitWord | None:
        if self.codeword is None:
            return None
        return self.codeword.slice(0, self.k)


@dataclass(frozen=True)
class SortPermutation:
    """``perm[r]`` is the original position placed at rank ``r``."""

    perm: tuple[int, ...]

    @property
    def inverse(self) -> tuple[int, ...]:
        inv = [0] * len(self.perm)
        for r, p in enumerate(self.perm):
            inv[p] = r
        return tuple(inv)

    def apply(self, seq):
        return [seq[p] for p in self.perm]

    def restore(self, seq):
        return [seq[r] for r in self.inverse]

    def matrix(self) -> np.ndarray:
        """Permutation matrix with ``x @ matrix() == apply(x)`` for row vectors."""
        n = len(self.perm)
        out = np.zeros((n, n), dtype=np.int64)
        out[list(self.perm), range(n)] = 1
        return out


def antenna_sort(gains: Sequence[float]) -> SortPermutation:
    """Ascending-gain order, ties kept in original index order."""
    gains = np.asarray(gains, dtype=np.float64)
    return SortPermutation(tuple(int(i) for i in np.argsort(gains, kind="stable")))


@lru_cache(maxsize=None)
def colex_combinations(n: int, t: int) -> np.ndarray:
    """All ``t``-subsets of ``range(n)`` as sorted rows, in colexicographic order."""
    if t == 0:
        out = np.zeros((1, 0), dtype=np.int64)
    elif t > n:
        out = np.zeros((0, t), dtype=np.int64)
    else:
        blocks = []
        for top in range(t - 1, n):
            head = colex_combinations(top, t - 1)
            blocks.append(np.hstack([head, np.full((len(head), 1), top, dtype=np.int64)]))
        out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def _colex_masks(n: int, t: int) -> Iterator[int]:
    # Gosper's hack: increasing bitmasks of popcount t are colex-ordered subsets
    if t == 0:
        yield 0
        return
    v = (1 << t) - 1
    while v < (1 << n):
        yield v
        low = v & -v
        ripple = v + low
        v = ripple | (((v ^ ripple) >> 2) // low)


def _check_priority(priority, size: int) -> np.ndarray:
    if priority is None:
        return np.arange(size, dtype=np.int64)
    prio = np.asarray(priority, dtype=np.int64)
    if prio.shape != (size,) or not np.array_equal(np.sort(prio), np.arange(size)):
        raise CodeParameterError("priority must be a permutation of the positions")
    return prio


def _syndrome_value(code: SystematicCode, y: BitWord) -> int:
    colsyn = code.column_syndromes
    bits = y.bits().astype(bool)
    return int(np.bitwise_xor.reduce(colsyn[bits])) if bits.any() else 0


def _positions_to_word(positions, n: int) -> int:
    v = 0
    for p in positions:
        v |= 1 << (n - 1 - int(p))
    return v


def iter_bit_patterns(n: int, w_th: int, priority=None) -> Iterator[tuple[int, ...]]:
    """Error supports in bit-level test order (zero pattern first)."""
    prio = _check_priority(priority, n)
    for w in range(w_th + 1):
        for mask in _colex_masks(n, w):
            yield tuple(int(prio[r]) for r in range(n) if mask >> r & 1)


def bit_level_grand(y_b: BitWord, code: SystematicCode, w_th: int, priority=None) -> DecodeOutcome:
    if y_b.length != code.n:
        raise CodeParameterError(f"word length {y_b.length} != n={code.n}")
    if not 0 <= w_th <= code.n:
        raise CodeParameterError(f"need 0 <= w_th <= n, got {w_th}")
    n = code.n
    prio = _check_priority(priority, n)
    s0 = np.uint64(_syndrome_value(code, y_b))
    queries = 1
    if s0 == 0:
        return DecodeOutcome(y_b, queries, code.k)
    syn_by_rank = code.column_syndromes[prio]
    for w in range(1, w_th + 1):
        combos = colex_combinations(n, w)
        step = max(1, CHUNK_ELEMENTS // w)
        for start in range(0, len(combos), step):
            block = combos[start:start + step]
            syn = np.bitwise_xor.reduce(syn_by_rank[block], axis=1)
            hits = np.flatnonzero(syn == s0)
            if hits.size:
                h = int(hits[0])
                err = _positions_to_word(prio[block[h]], n)
                return DecodeOutcome(BitWord(y_b.value ^ err, n), queries + h + 1, code.k)
            queries += len(block)
    return DecodeOutcome(None, queries, code.k)


def string_priority_to_bits(order: Sequence[int], bits_per_symbol: int) -> np.ndarray:
    """Expand a string order to bit positions, keeping bit order inside each string."""
    m = bits_per_symbol
    return np.array([s * m + j for s in order for j in range(m)], dtype=np.int64)


def sorted_bit_level_grand(y_b: BitWord, code: SystematicCode, w_th: int, gains,
                           constellation: Constellation) -> DecodeOutcome:
    m = constellation.bits_per_symbol
    if len(gains) * m != code.n:
        raise CodeParameterError(f"{len(gains)} gains do not cover n={code.n} bits")
    order = antenna_sort(gains).perm
    return bit_level_grand(y_b, code, w_th, priority=string_priority_to_bits(order, m))


def _labels(strings, constellation: Constellation) -> np.ndarray:
    if isinstance(strings, np.ndarray) and strings.dtype.kind in "iu":
        labels = strings.astype(np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= constellation.M):
            raise ModulationError("label outside the constellation")
        return labels
    return np.array([constellation.label_int(s) for s in strings], dtype=np.int64)


def string_syndromes(code: SystematicCode, bits_per_symbol: int) -> np.ndarray:
    """``table[i, v]``: syndrome of the word carrying string ``v`` at string position ``i``."""
    m = bits_per_symbol
    cache = code.__dict__.setdefault("_string_syndromes", {})
    if m not in cache:
        L = code.n // m
        colsyn = code.column_syndromes.reshape(L, m)
        table = np.zeros((L, 1 << m), dtype=np.uint64)
        for v in range(1, 1 << m):
            for j in range(m):
                if v >> (m - 1 - j) & 1:
                    table[:, v] ^= colsyn[:, j]
        table.setflags(write=False)
        cache[m] = table
    return cache[m]


@lru_cache(maxsize=None)
def _assignments(t: int, l2: int) -> np.ndarray:
    out = np.zeros((len(list(combinations(range(t), l2))), t), dtype=bool)
    for a, slots in enumerate(combinations(range(t), l2)):
        out[a, list(slots)] = True
    return out


@lru_cache(maxsize=None)
def _string_choices(t: int) -> np.ndarray:
    return np.array(list(product(range(4), repeat=t)), dtype=np.int64).reshape(-1, t)


def iter_symbol_patterns(labels, constellation: Constellation, structures, priority=None
                         ) -> Iterator[tuple[ErrorStructure, tuple[tuple[int, int], ...]]]:
    """Non-zero candidate patterns in symbol-level test order.

    Yields ``(structure, ((position, error_string), ...))``.
    """
    labels = _labels(labels, constellation)
    L = len(labels)
    prio = _check_priority(priority, L)
    for s in structures:
        t = s.l1 + s.l2
        for mask in _colex_masks(L, t):
            positions = [int(prio[r]) for r in range(L) if mask >> r & 1]
            for e2_slots in combinations(range(t), s.l2):
                sets = [constellation.e2_table[labels[p]] if j in e2_slots
                        else constellation.e1_table[labels[p]]
                        for j, p in enumerate(positions)]
                for strings in product(*sets):
                    yield s, tuple(zip(positions, strings))


def pattern_count_for_structure(structure: ErrorStructure, strings, constellation: Constellation) -> int:
    """Number of candidates the symbol-level enumeration emits for ``structure``."""
    labels = _labels(strings, constellation)
    l1, l2 = structure.l1, structure.l2
    dp = [[0] * (l2 + 1) for _ in range(l1 + 1)]
    dp[0][0] = 1
    for v in labels:
        n1, n2 = len(constellation.e1_table[v]), len(constellation.e2_table[v])
        for a in range(l1, -1, -1):
            for b in range(l2, -1, -1):
                if a:
                    dp[a][b] += dp[a - 1][b] * n1
                if b:
                    dp[a][b] += dp[a][b - 1] * n2
    return dp[l1][l2]


def symbol_level_grand(strings, code: SystematicCode, constellation: Constellation,
                       ranking: StructureRanking, priority=None) -> DecodeOutcome:
    labels = _labels(strings, constellation)
    m = constellation.bits_per_symbol
    L = len(labels)
    if L * m != code.n:
        raise CodeParameterError(f"{L} strings of {m} bits do not match n={code.n}")
    prio = _check_priority(priority, L)
    y_val = 0
    for v in labels:
        y_val = (y_val << m) | int(v)
    y_b = BitWord(y_val, code.n)
    table = string_syndromes(code, m)
    s0 = np.uint64(0)
    for i, v in enumerate(labels):
        s0 ^= table[i, v]
    queries = 1
    if s0 == 0:
        return DecodeOutcome(y_b, queries, code.k)

    e1_rank = constellation.e1_padded[labels][prio]
    e2_rank = constellation.e2_padded[labels][prio]
    syn_rank = table[prio]
    for s in ranking.structures:
        t = s.l1 + s.l2
        if t > L:
            continue
        combos = colex_combinations(L, t)
        assign = _assignments(t, s.l2)
        choice = _string_choices(t)
        per_subset = len(assign) * len(choice) * t
        step = max(1, CHUNK_ELEMENTS // per_subset)
        for start in range(0, len(combos), step):
            cc = combos[start:start + step]
            # options[c, a, slot, j]: j-th candidate string for that slot
            options = np.where(assign[None, :, :, None], e2_rank[cc][:, None], e1_rank[cc][:, None])
            chosen = np.take_along_axis(options[:, :, None], choice[None, None, :, :, None], axis=4)[..., 0]
            valid = (chosen >= 0).all(axis=-1)
            contrib = syn_rank[cc[:, None, None, :], np.maximum(chosen, 0)]
            syn = np.bitwise_xor.reduce(contrib, axis=-1)
            flat_valid = valid.ravel()
            hits = np.flatnonzero(flat_valid & (syn.ravel() == s0))
            if hits.size:
                h = int(hits[0])
                queries += int(np.count_nonzero(flat_valid[:h])) + 1
                ci, ai, pi = np.unravel_index(h, valid.shape)
                err = 0
                for slot in range(t):
                    pos = int(prio[cc[ci, slot]])
                    err |= int(chosen[ci, ai, pi, slot]) << (m * (L - 1 - pos))
                return DecodeOutcome(BitWord(y_val ^ err, code.n), queries, code.k)
            queries += int(np.count_nonzero(flat_valid))
    return DecodeOutcome(None, queries, code.k)


def sorted_symbol_level_grand(strings, code: SystematicCode, constellation: Constellation,
                              ranking: StructureRanking, gains) -> DecodeOutcome:
    """Symbol-level GRAND that spends its guesses on the weakest streams first.

    Ordering the priority instead of physically permuting the strings makes the
    inverse permutation implicit: the codeword comes back in transmit order.
    """
    if len(gains) != len(strings):
        raise CodeParameterError("need one gain per string")
    return symbol_level_grand(strings, code, constellation, ranking,
                              priority=antenna_sort(gains).perm)


DECODERS = ("bit", "bit-sorted", "symbol", "symbol-sorted")
