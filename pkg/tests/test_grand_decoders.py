import itertools
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimogrand import error_model as em
from mimogrand.binary_code import (BitWord, CodeParameterError, build_coset_leader_table, encode,
                                   generate_rlc, is_codeword, ml_decode_oracle, syndrome)
from mimogrand.grand_decoders import (DecodeOutcome, SortPermutation, antenna_sort, bit_level_grand,
                                      colex_combinations, iter_bit_patterns, iter_symbol_patterns,
                                      pattern_count_for_structure, sorted_bit_level_grand,
                                      sorted_symbol_level_grand, string_priority_to_bits,
                                      symbol_level_grand)
from mimogrand.modulation import ModulationError, build_gray_qam, labels_from_bits

C16 = build_gray_qam(16)
CODE = generate_rlc(26, 32, 7)
RANK3 = em.rank_structures(8, 16, em.db_to_linear(15), 3)


def reference_bit_decode(y, code, w_th, priority=None):
    """One pattern at a time, straight from the enumeration order."""
    for q, support in enumerate(iter_bit_patterns(code.n, w_th, priority), start=1):
        e = BitWord(sum(1 << (code.n - 1 - p) for p in support), code.n)
        if is_codeword(code, y ^ e):
            return y ^ e, q
    return None, q


def reference_symbol_decode(labels, code, c, ranking, priority=None):
    m, L = c.bits_per_symbol, len(labels)
    y = BitWord(int("".join(c.label_str(v) for v in labels), 2), code.n)
    if is_codeword(code, y):
        return y, 1
    q = 1
    for _, pattern in iter_symbol_patterns(labels, c, ranking.structures, priority):
        q += 1
        e = sum(s << (m * (L - 1 - p)) for p, s in pattern)
        if is_codeword(code, y ^ BitWord(e, code.n)):
            return y ^ BitWord(e, code.n), q
    return None, q


def noisy_labels(rng, code, flips):
    a = BitWord(int(rng.integers(0, 2**code.k)), code.k)
    x = encode(code, a)
    e = 0
    for p in rng.choice(code.n, flips, replace=False):
        e |= 1 << (code.n - 1 - int(p))
    return x, x ^ BitWord(e, code.n)


def test_antenna_sort_examples():
    assert antenna_sort([3, 1, 2]).perm == (1, 2, 0)  # 0-based form of (2, 3, 1)
    assert antenna_sort([5.0] * 4).perm == (0, 1, 2, 3)
    assert antenna_sort([50.0] * 8).perm == tuple(range(8))


def test_sort_permutation_roundtrip():
    p = antenna_sort([0.3, 2.0, 0.1, 1.5])
    seq = ["a", "b", "c", "d"]
    assert p.apply(seq) == ["c", "a", "d", "b"]
    assert p.restore(p.apply(seq)) == seq
    x = np.arange(4)
    assert list(x @ p.matrix()) == p.apply(list(x))
    assert np.array_equal(p.matrix().T @ p.matrix(), np.eye(4, dtype=int))


def test_colex_order():
    rows = [tuple(r) for r in colex_combinations(5, 2)]
    assert rows == sorted(itertools.combinations(range(5), 2), key=lambda c: c[::-1])
    assert len(colex_combinations(32, 3)) == math.comb(32, 3)


def test_bit_level_examples():
    x = encode(CODE, BitWord(12345, 26))
    out = bit_level_grand(x, CODE, 3)
    assert out.decoded and out.codeword == x and out.queries == 1
    for i in range(32):
        y = x ^ BitWord(1 << (31 - i), 32)
        out = bit_level_grand(y, CODE, 1)
        assert out.decoded and out.queries <= 1 + 32
        assert out.codeword.distance(y) == 1
    with pytest.raises(CodeParameterError):
        bit_level_grand(BitWord.zeros(31), CODE, 2)
    with pytest.raises(CodeParameterError):
        bit_level_grand(x, CODE, 2, priority=[0] * 32)


def test_bit_level_queries_exact_for_single_flip():
    # the first weight-1 hit sits at the flipped position's rank in the enumeration
    code = generate_rlc(4, 8, 2)  # distinct nonzero columns
    x = encode(code, BitWord(5, 4))
    for i in range(8):
        out = bit_level_grand(x ^ BitWord(1 << (7 - i), 8), code, 2)
        assert out.codeword == x and out.queries == 2 + i


def test_oracle_equivalence_small_code():
    code = generate_rlc(4, 8, 7)
    table = build_coset_leader_table(code)
    for v in range(256):
        y = BitWord(v, 8)
        d = ml_decode_oracle(code, y).distance(y)
        out = bit_level_grand(y, code, 8)
        assert out.codeword.distance(y) == d
        assert table.decode(code, y).distance(y) == d


def test_abandonment():
    code = generate_rlc(4, 8, 7)
    y = BitWord(0b10110111, 8)
    if bit_level_grand(y, code, 8).codeword.distance(y) > 0:
        out = bit_level_grand(y, code, 0)
        assert out.abandoned and out.queries == 1 and out.info_bits is None


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), flips=st.integers(0, 4), w_th=st.integers(0, 3), sort=st.booleans())
def test_bit_level_matches_reference(seed, flips, w_th, sort):
    rng = np.random.default_rng(seed)
    _, y = noisy_labels(rng, CODE, flips)
    prio = rng.permutation(32) if sort else None
    out = bit_level_grand(y, CODE, w_th, prio)
    ref, q = reference_bit_decode(y, CODE, w_th, prio)
    assert out.codeword == ref and out.queries == q


def test_bit_patterns_sets():
    for w_th in (0, 1, 2, 3):
        plain = list(iter_bit_patterns(12, w_th))
        prio = np.random.default_rng(w_th).permutation(12)
        sorted_ = list(iter_bit_patterns(12, w_th, prio))
        assert len(plain) == len(set(plain)) == em.bitlevel_query_upper_bound(12, w_th)
        assert {tuple(sorted(p)) for p in plain} == {tuple(sorted(p)) for p in sorted_}


def test_sorted_bit_level_equal_gains_is_plain():
    rng = np.random.default_rng(1)
    for _ in range(30):
        _, y = noisy_labels(rng, CODE, 2)
        a = sorted_bit_level_grand(y, CODE, 3, np.ones(8), C16)
        b = bit_level_grand(y, CODE, 3)
        assert a == b
    assert list(string_priority_to_bits([2, 0, 1], 2)) == [4, 5, 0, 1, 2, 3]


def distinct_column_code(k, n):
    # single-bit errors must be the unique weight-1 explanation
    for seed in range(1000):
        code = generate_rlc(k, n, seed)
        cols = code.column_syndromes
        if len(set(cols.tolist())) == n and 0 not in cols:
            return code
    raise AssertionError("no such seed")


def test_sorted_bit_level_finds_weak_string_error_first():
    code = distinct_column_code(12, 24)
    L = 6
    rng = np.random.default_rng(2)
    for _ in range(60):
        x = encode(code, BitWord(int(rng.integers(0, 2**12)), 12))
        weakest = int(rng.integers(0, L))
        bit = weakest * 4 + int(rng.integers(0, 4))
        y = x ^ BitWord(1 << (23 - bit), 24)
        gains = rng.uniform(1, 10, L)
        gains[weakest] = 0.5
        s = sorted_bit_level_grand(y, code, 2, gains, C16)
        u = bit_level_grand(y, code, 2)
        assert s.codeword == u.codeword == x
        assert s.queries <= u.queries <= 1 + 24
        assert s.queries <= 1 + 4


def test_symbol_level_examples():
    x = encode(CODE, BitWord(777, 26))
    labels = labels_from_bits(C16, x)
    out = symbol_level_grand(labels, CODE, C16, RANK3)
    assert out.queries == 1 and out.codeword == x
    assert RANK3.structures[0] == em.ErrorStructure(1, 0)
    for pos in range(8):
        for e in C16.e1_table[labels[pos]]:
            y = labels.copy()
            y[pos] ^= e
            bound = 1 + sum(len(C16.e1_table[v]) for v in y)
            out = symbol_level_grand(y, CODE, C16, RANK3)
            assert out.decoded and out.queries <= bound
    with pytest.raises(ModulationError):
        symbol_level_grand(np.array([0] * 7 + [16]), CODE, C16, RANK3)
    with pytest.raises(CodeParameterError):
        symbol_level_grand(labels[:7], CODE, C16, RANK3)
    strings = [C16.label_str(v) for v in labels]
    assert symbol_level_grand(strings, CODE, C16, RANK3).codeword == x


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_err=st.integers(0, 3), sort=st.booleans(),
       snr_db=st.sampled_from([5, 10, 20]))
def test_symbol_level_matches_reference(seed, n_err, sort, snr_db):
    rng = np.random.default_rng(seed)
    x = encode(CODE, BitWord(int(rng.integers(0, 2**26)), 26))
    labels = labels_from_bits(C16, x)
    for pos in rng.choice(8, n_err, replace=False):
        labels[pos] = int(rng.integers(0, 16))
    ranking = em.rank_structures(8, 16, em.db_to_linear(snr_db), 3)
    prio = rng.permutation(8) if sort else None
    out = symbol_level_grand(labels, CODE, C16, ranking, prio)
    ref, q = reference_symbol_decode(labels, CODE, C16, ranking, prio)
    assert out.codeword == ref and out.queries == q


def test_worst_case_query_bound():
    ranking = em.rank_structures(8, 16, 10.0, 16)
    out = symbol_level_grand(np.arange(8) % 16, generate_rlc(31, 32, 3), C16, ranking)
    assert out.queries <= 9**8


def test_pattern_counts_and_uniqueness():
    inner = np.array([0b0010] * 5)
    corner = np.array([0b1110] * 5)
    assert pattern_count_for_structure(em.ErrorStructure(1, 0), inner, C16) == 4 * 5
    assert pattern_count_for_structure(em.ErrorStructure(0, 1), corner, C16) == 5
    rng = np.random.default_rng(4)
    labels = rng.integers(0, 16, 5)
    structures = em.candidate_structures(5, 4)
    seen = set()
    for s in structures:
        emitted = [p for _, p in iter_symbol_patterns(labels, C16, [s])]
        assert len(emitted) == pattern_count_for_structure(s, labels, C16)
        seen.update(emitted)
        for pattern in emitted:
            w = sum(bin(e).count("1") for _, e in pattern)
            assert w == s.weight
    total = sum(pattern_count_for_structure(s, labels, C16) for s in structures)
    assert len(seen) == total


def test_structure_weight_bounds_bit_weight():
    # every symbol-level candidate within w_th is also a bit-level candidate within w_th
    labels = np.random.default_rng(5).integers(0, 16, 4)
    bit_set = {frozenset(p) for p in iter_bit_patterns(16, 3)}
    for _, pattern in iter_symbol_patterns(labels, C16, em.candidate_structures(4, 3)):
        support = frozenset(4 * pos + j for pos, e in pattern for j in range(4) if e >> (3 - j) & 1)
        assert support in bit_set


def test_sorted_symbol_identity_gains():
    rng = np.random.default_rng(6)
    for _ in range(30):
        _, y = noisy_labels(rng, CODE, 2)
        labels = labels_from_bits(C16, y)
        assert (sorted_symbol_level_grand(labels, CODE, C16, RANK3, np.ones(8))
                == symbol_level_grand(labels, CODE, C16, RANK3))


def test_sorted_symbol_roundtrip_through_permutation():
    rng = np.random.default_rng(7)
    for _ in range(30):
        x, y = noisy_labels(rng, CODE, 1)
        labels = labels_from_bits(C16, y)
        gains = rng.uniform(0.5, 5, 8)
        out = sorted_symbol_level_grand(labels, CODE, C16, RANK3, gains)
        assert out.decoded and is_codeword(CODE, out.codeword)
        perm = antenna_sort(gains)
        hyp = perm.apply(list(labels_from_bits(C16, out.codeword)))
        assert perm.restore(hyp) == list(labels_from_bits(C16, out.codeword))


class PermutedCode(SimpleNamespace):
    """Same code with string positions relabelled; the decoders only read these fields."""


def permuted_code(code, perm, m):
    cols = code.column_syndromes.reshape(-1, m)[list(perm)].reshape(-1)
    return PermutedCode(n=code.n, k=code.k, column_syndromes=cols)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_err=st.integers(1, 2))
def test_sorting_invariance_under_joint_relabelling(seed, n_err):
    rng = np.random.default_rng(seed)
    _, y = noisy_labels(rng, CODE, n_err)
    labels = labels_from_bits(C16, y)
    gains = rng.permutation(8) + 1.0
    base = sorted_symbol_level_grand(labels, CODE, C16, RANK3, gains)
    perm = list(rng.permutation(8))
    other = sorted_symbol_level_grand(labels[perm], permuted_code(CODE, perm, 4), C16, RANK3, gains[perm])
    assert base.queries == other.queries
    if base.decoded:
        back = np.empty(8, dtype=np.int64)
        back[perm] = labels_from_bits(C16, other.codeword)
        assert list(back) == list(labels_from_bits(C16, base.codeword))
    else:
        assert other.abandoned


def test_decoded_words_pass_membership():
    rng = np.random.default_rng(8)
    for _ in range(50):
        _, y = noisy_labels(rng, CODE, 3)
        labels = labels_from_bits(C16, y)
        gains = rng.uniform(0.1, 3, 8)
        for out in (bit_level_grand(y, CODE, 3), sorted_bit_level_grand(y, CODE, 3, gains, C16),
                    symbol_level_grand(labels, CODE, C16, RANK3),
                    sorted_symbol_level_grand(labels, CODE, C16, RANK3, gains)):
            assert out.queries >= 1
            if out.decoded:
                assert syndrome(CODE, out.codeword).value == 0
                assert out.info_bits == out.codeword.slice(0, 26)


def test_outcome_flags():
    o = DecodeOutcome(None, 5, 4)
    assert o.abandoned and not o.decoded
    assert SortPermutation((1, 0)).inverse == (1, 0)
