"""Gray-labeled square QAM and the neighborhood sets used by symbol-level GRAND.

Labels are handled as integers internally (first bit = most significant) and
as bit strings at the API boundary. Odd-position bits (1st, 3rd, ...) select
the in-phase coordinate and even-position bits the quadrature coordinate.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .binary_code import BitWord


class ModulationError(ValueError):
    pass


class PointClass(enum.Enum):
    CORNER = "corner"
    SIDE = "side"
    INNER = "inner"


def _axis_gray(bits: int) -> list[int]:
    """Per-axis labels ordered by increasing coordinate.

    Reflected Gray code with its bit order reversed and the leading bit
    inverted, which gives 10, 00, 01, 11 for two bits.
    """
    seq = []
    for i in range(1 << bits):
        g = i ^ (i >> 1)
        rev = int(format(g, f"0{bits}b")[::-1], 2)
        seq.append(rev ^ (1 << (bits - 1)))
    return seq


def _interleave(i_bits: int, q_bits: int, per_axis: int) -> int:
    label = 0
    for j in range(per_axis):
        ib = (i_bits >> (per_axis - 1 - j)) & 1
        qb = (q_bits >> (per_axis - 1 - j)) & 1
        label = (label << 2) | (ib << 1) | qb
    return label


@dataclass(frozen=True)
class NeighborhoodSets:
    e1: tuple[str, ...]
    e2: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class Constellation:
    M: int
    bits_per_symbol: int
    d: float
    side: int
    # indexed by integer label
    coords: np.ndarray = field(repr=False)
    i_index: np.ndarray = field(repr=False)
    q_index: np.ndarray = field(repr=False)
    # label at [q_index, i_index]
    label_at: np.ndarray = field(repr=False)
    e1_table: tuple[tuple[int, ...], ...] = field(repr=False)
    e2_table: tuple[tuple[int, ...], ...] = field(repr=False)
    classes: tuple[PointClass, ...] = field(repr=False)

    def label_str(self, label: int) -> str:
        return format(label, f"0{self.bits_per_symbol}b")

    def label_int(self, label: str | int) -> int:
        if isinstance(label, str):
            if len(label) != self.bits_per_symbol or set(label) - {"0", "1"}:
                raise ModulationError(f"not a {self.M}-QAM label: {label!r}")
            return int(label, 2)
        label = int(label)
        if not 0 <= label < self.M:
            raise ModulationError(f"label {label} out of range for M={self.M}")
        return label

    @property
    def points(self) -> dict[str, complex]:
        return {self.label_str(v): complex(self.coords[v]) for v in range(self.M)}

    @property
    def grid(self) -> list[list[str]]:
        """Labels row by row, top row = largest quadrature coordinate."""
        return [[self.label_str(v) for v in row] for row in self.label_at[::-1]]

    def dump(self) -> str:
        return "\n".join(" ".join(row) for row in self.grid) + "\n"

    @property
    def e1_padded(self) -> np.ndarray:
        return _padded(self.e1_table)

    @property
    def e2_padded(self) -> np.ndarray:
        return _padded(self.e2_table)


def _padded(table) -> np.ndarray:
    out = np.full((len(table), 4), -1, dtype=np.int64)
    for v, row in enumerate(table):
        out[v, : len(row)] = row
    return out


@lru_cache(maxsize=None)
def build_gray_qam(M: int) -> Constellation:
    m = int(round(math.log2(M))) if M > 0 else 0
    if M < 4 or (1 << m) != M or m % 2:
        raise ModulationError(f"M must be an even power of two >= 4, got {M}")
    per_axis = m // 2
    side = 1 << per_axis
    d = math.sqrt(3.0 / (2.0 * (M - 1)))
    axis = _axis_gray(per_axis)
    level = (2 * np.arange(side) - (side - 1)) * d

    coords = np.zeros(M, dtype=np.complex128)
    i_index = np.zeros(M, dtype=np.int64)
    q_index = np.zeros(M, dtype=np.int64)
    label_at = np.zeros((side, side), dtype=np.int64)
    for qi in range(side):
        for ii in range(side):
            v = _interleave(axis[ii], axis[qi], per_axis)
            coords[v] = level[ii] + 1j * level[qi]
            i_index[v], q_index[v] = ii, qi
            label_at[qi, ii] = v

    def extreme(x):
        return x == 0 or x == side - 1

    e1, e2, classes = [], [], []
    for v in range(M):
        ii, qi = i_index[v], q_index[v]
        n1 = [label_at[qi + dq, ii + di] for di, dq in ((1, 0), (-1, 0), (0, 1), (0, -1))
              if 0 <= ii + di < side and 0 <= qi + dq < side]
        n2 = [label_at[qi + dq, ii + di] for di in (1, -1) for dq in (1, -1)
              if 0 <= ii + di < side and 0 <= qi + dq < side]
        e1.append(tuple(sorted(int(v ^ u) for u in n1)))
        e2.append(tuple(sorted(int(v ^ u) for u in n2)))
        n_ext = int(extreme(ii)) + int(extreme(qi))
        classes.append((PointClass.INNER, PointClass.SIDE, PointClass.CORNER)[n_ext])

    for arr in (coords, i_index, q_index, label_at):
        arr.setflags(write=False)
    return Constellation(M=M, bits_per_symbol=m, d=d, side=side, coords=coords,
                         i_index=i_index, q_index=q_index, label_at=label_at,
                         e1_table=tuple(e1), e2_table=tuple(e2), classes=tuple(classes))


def labels_from_bits(c: Constellation, bits: BitWord) -> np.ndarray:
    m = c.bits_per_symbol
    if bits.length % m:
        raise ModulationError(f"{bits.length} bits do not split into {m}-bit strings")
    L = bits.length // m
    mask = (1 << m) - 1
    return np.array([(bits.value >> (m * (L - 1 - i))) & mask for i in range(L)], dtype=np.int64)


def bits_from_labels(c: Constellation, labels) -> BitWord:
    m = c.bits_per_symbol
    v = 0
    for lab in labels:
        v = (v << m) | c.label_int(lab)
    return BitWord(v, m * len(labels))


def map_bits(c: Constellation, bits: BitWord, L: int | None = None) -> np.ndarray:
    labels = labels_from_bits(c, bits)
    if L is not None and len(labels) != L:
        raise ModulationError(f"expected {L} symbols, bits give {len(labels)}")
    return c.coords[labels]


def _exact_labels(c: Constellation, symbols) -> np.ndarray:
    symbols = np.atleast_1d(np.asarray(symbols, dtype=np.complex128))
    dist = np.abs(symbols[:, None] - c.coords[None, :])
    labels = dist.argmin(axis=1)
    if np.any(dist[np.arange(len(symbols)), labels] > 1e-9):
        raise ModulationError("demap expects exact constellation points; quantize first")
    return labels


def demap(c: Constellation, symbols) -> BitWord:
    return bits_from_labels(c, _exact_labels(c, symbols))


def quantize(c: Constellation, z: complex, scale: float = 1.0) -> str:
    """Nearest-point label of ``z / scale``; exact ties go to the smaller label."""
    if scale <= 0:
        raise ModulationError("scale must be positive")
    w = complex(z) / scale
    dist = np.abs(w - c.coords)
    best = dist.min()
    tied = np.flatnonzero(dist <= best * (1 + 1e-12) + 1e-15)
    return c.label_str(int(tied.min()))


def quantize_many(c: Constellation, z: np.ndarray, scale) -> np.ndarray:
    """Vectorized hard decision by per-axis rounding, returns integer labels."""
    w = np.asarray(z) / scale
    half = (c.side - 1) / 2.0
    ii = np.clip(np.rint(w.real / (2 * c.d) + half), 0, c.side - 1).astype(np.int64)
    qi = np.clip(np.rint(w.imag / (2 * c.d) + half), 0, c.side - 1).astype(np.int64)
    return c.label_at[qi, ii]


def classify_point(c: Constellation, label: str | int) -> PointClass:
    return c.classes[c.label_int(label)]


def error_strings(c: Constellation, label: str | int) -> NeighborhoodSets:
    v = c.label_int(label)
    return NeighborhoodSets(e1=tuple(c.label_str(e) for e in c.e1_table[v]),
                            e2=tuple(c.label_str(e) for e in c.e2_table[v]))


def neighborhoods(c: Constellation, label: str | int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Labels at distance 2d and 2*sqrt(2)*d from ``label``."""
    v = c.label_int(label)
    return (tuple(sorted(c.label_str(v ^ e) for e in c.e1_table[v])),
            tuple(sorted(c.label_str(v ^ e) for e in c.e2_table[v])))


@lru_cache(maxsize=None)
def error_type_table(c: Constellation) -> np.ndarray:
    """``table[rx, tx]``: 0 no error, 1 type-E1, 2 type-E2, 3 anything else."""
    t = np.full((c.M, c.M), 3, dtype=np.int8)
    for rx in range(c.M):
        t[rx, rx] = 0
        for e in c.e1_table[rx]:
            t[rx, rx ^ e] = 1
        for e in c.e2_table[rx]:
            t[rx, rx ^ e] = 2
    t.setflags(write=False)
    return t
