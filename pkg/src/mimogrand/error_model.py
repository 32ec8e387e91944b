"""Error-structure probabilities for Gray QAM under perfect channel hardening.

Per-symbol terms are joint probabilities: the detected point belongs to a given
class (corner, side, inner) *and* the error string is zero, type-E1 or type-E2.
They only keep the decision boundaries nearest the transmitted point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import binom, erfc

CLASSES = ("c", "s", "i")


class ModelParameterError(ValueError):
    pass


def q_function(z):
    """Standard normal tail probability, scalar or elementwise."""
    if np.ndim(z) == 0:
        return 0.5 * math.erfc(float(z) / math.sqrt(2.0))
    return 0.5 * erfc(np.asarray(z, dtype=np.float64) / math.sqrt(2.0))


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def ebn0_to_snr(eb_n0_db: float, M: int, k: int, n: int) -> float:
    """Ergodic SNR (linear) from Eb/N0 in dB for rate k/n and M-QAM."""
    return math.log2(M) * (k / n) * db_to_linear(eb_n0_db)


@dataclass(frozen=True)
class ErrorStructure:
    l1: int
    l2: int

    def __post_init__(self):
        if self.l1 < 0 or self.l2 < 0:
            raise ModelParameterError("structure counts must be non-negative")

    @property
    def weight(self) -> int:
        return self.l1 + 2 * self.l2

    def __str__(self) -> str:
        return f"[{self.l1} {self.l2}]"


@dataclass(frozen=True)
class SymbolErrorProbs:
    M: int
    d_prime: float
    p0: dict
    pe1: dict
    pe2: dict

    def point_counts(self) -> dict:
        r = math.isqrt(self.M) - 2
        return {"c": 4, "s": 4 * r, "i": r * r}

    def per_symbol(self) -> tuple[float, float, float]:
        """Marginal probabilities of a zero, type-E1 and type-E2 error string."""
        n = self.point_counts()
        return (sum(n[l] * self.p0[l] for l in CLASSES),
                sum(n[l] * self.pe1[l] for l in CLASSES),
                sum(n[l] * self.pe2[l] for l in CLASSES))


def symbol_error_probs(M: int, snr: float) -> SymbolErrorProbs:
    if snr <= 0:
        raise ModelParameterError("snr must be positive")
    side = math.isqrt(M)
    if side * side != M or M < 4 or M & (M - 1):
        raise ModelParameterError(f"M must be a square power of two, got {M}")
    dp = math.sqrt(3.0 * snr / (M - 1))
    q = q_function(dp)
    u = 1.0 / M
    p0 = {"c": u * (1 - q) ** 2, "s": u * (1 - q) * (1 - 2 * q), "i": u * (1 - 2 * q) ** 2}
    pe1 = {"c": 2 * u * (1 - q) * q,
           "s": u * (2 * (1 - q) * q + (1 - 2 * q) * q),
           "i": 4 * u * (1 - 2 * q) * q}
    pe2 = {"c": u * q * q, "s": 2 * u * q * q, "i": 4 * u * q * q}
    return SymbolErrorProbs(M=M, d_prime=dp, p0=p0, pe1=pe1, pe2=pe2)


def _compositions(total: int, caps: tuple[int, int, int]):
    for a in range(min(total, caps[0]) + 1):
        for b in range(min(total - a, caps[1]) + 1):
            c = total - a - b
            if c <= caps[2]:
                yield a, b, c


@lru_cache(maxsize=64)
def _class_splits(L: int, M: int):
    """All (Lc, Ls, Li) with their multinomial times point-count weight."""
    r = math.isqrt(M) - 2
    splits = list(_compositions(L, (L, L, L)))
    counts = np.array(splits, dtype=np.int64).T
    weight = np.array([float(math.factorial(L) // (math.factorial(a) * math.factorial(b) * math.factorial(c))
                             * 4 ** (a + b) * r ** (b + 2 * c)) for a, b, c in splits])
    return counts, weight


def structure_probability(L: int, l1: int, l2: int, probs: SymbolErrorProbs, M: int | None = None) -> float:
    """Probability of an error pattern of structure ``[l1 l2]`` over ``L`` strings.

    Evaluates the triple sum over the class split (Lc, Ls, Li), the erroneous
    positions per class and the E1/E2 split per class. The class-split sum is
    vectorized; the two inner sums are looped.
    """
    M = probs.M if M is None else M
    if l1 < 0 or l2 < 0 or l1 + l2 > L:
        raise ModelParameterError(f"invalid structure [{l1} {l2}] for L={L}")
    counts, weight = _class_splits(L, M)
    p0 = [probs.p0[l] for l in CLASSES]
    pe1 = [probs.pe1[l] for l in CLASSES]
    pe2 = [probs.pe2[l] for l in CLASSES]
    total = 0.0
    for errs in _compositions(l1 + l2, (L, L, L)):
        inner = 0.0
        for e1s in _compositions(l1, errs):
            term = 1.0
            for j in range(3):
                term *= comb(errs[j], e1s[j]) * pe1[j] ** e1s[j] * pe2[j] ** (errs[j] - e1s[j])
            inner += term
        if inner == 0.0:
            continue
        mid = weight.copy()
        for j in range(3):
            free = counts[j] - errs[j]
            ok = free >= 0
            mid = np.where(ok, mid * binom(counts[j], errs[j]) * p0[j] ** np.where(ok, free, 0), 0.0)
        total += inner * float(mid.sum())
    return total


def structure_probability_closed(L: int, l1: int, l2: int, probs: SymbolErrorProbs) -> float:
    """Same quantity as a trinomial in the per-symbol marginals."""
    a, b, c = probs.per_symbol()
    l0 = L - l1 - l2
    coef = math.factorial(L) // (math.factorial(l0) * math.factorial(l1) * math.factorial(l2))
    return coef * a ** l0 * b ** l1 * c ** l2


def candidate_structures(L: int, w_th: int) -> list[ErrorStructure]:
    out = []
    for l2 in range(w_th // 2 + 1):
        for l1 in range(w_th - 2 * l2 + 1):
            if 0 < l1 + 2 * l2 and l1 + l2 <= L:
                out.append(ErrorStructure(l1, l2))
    return out


@dataclass(frozen=True)
class StructureRanking:
    snr_db: float
    w_th: int
    entries: tuple[tuple[ErrorStructure, float], ...]

    @property
    def structures(self) -> tuple[ErrorStructure, ...]:
        return tuple(s for s, _ in self.entries)

    def order_key(self) -> tuple[tuple[int, int], ...]:
        return tuple((s.l1, s.l2) for s in self.structures)


def rank_structures(L: int, M: int, snr: float, w_th: int, snr_db: float | None = None) -> StructureRanking:
    """Candidate structures within ``w_th`` by descending probability.

    Ties are broken by smaller weight, then smaller L2, then smaller L1.
    """
    if w_th < 1:
        raise ModelParameterError("w_th must be at least 1")
    probs = symbol_error_probs(M, snr)
    scored = [(s, structure_probability(L, s.l1, s.l2, probs)) for s in candidate_structures(L, w_th)]
    scored.sort(key=lambda e: (-e[1], e[0].weight, e[0].l2, e[0].l1))
    if snr_db is None:
        snr_db = 10 * math.log10(snr)
    return StructureRanking(snr_db=snr_db, w_th=w_th, entries=tuple(scored))


def ranking_tables(L: int, M: int, snr_db_grid, w_th: int) -> list[StructureRanking]:
    return [rank_structures(L, M, db_to_linear(s), w_th, snr_db=s) for s in snr_db_grid]


def tables_needed(tables: list[StructureRanking]) -> int:
    """Number of leading tables to keep once the ordering stops changing."""
    last_change = 0
    for i in range(1, len(tables)):
        if tables[i].order_key() != tables[i - 1].order_key():
            last_change = i
    return last_change + 1


def structure_bits(w_th: int) -> int:
    """Bits needed to store one structure ``[L1 L2]`` with weight up to ``w_th``."""
    return math.ceil(math.log2(w_th + 1)) + math.ceil(math.log2(w_th // 2 + 1))


def lookup_memory_bits(w_th: int, v: int, tau: int) -> int:
    if min(w_th, v, tau) < 1:
        raise ModelParameterError("all arguments must be >= 1")
    return structure_bits(w_th) * v * tau


def bitlevel_query_upper_bound(n: int, w_th: int) -> int:
    if not 0 <= w_th <= n:
        raise ModelParameterError(f"need 0 <= w_th <= n, got w_th={w_th}, n={n}")
    return sum(comb(n, t) for t in range(w_th + 1))
