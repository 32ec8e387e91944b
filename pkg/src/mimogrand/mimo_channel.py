"""Rayleigh MIMO channel, zero-forcing detection and lattice diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

MAX_GRAM_CONDITION = 1e12


class ChannelParameterError(ValueError):
    pass


class SingularChannelError(ArithmeticError):
    """Gram matrix too ill-conditioned for zero forcing."""


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric CN(0, variance) samples."""
    s = np.sqrt(variance / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    H: np.ndarray = field(repr=False)

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.complex128)
        if H.ndim != 2:
            raise ChannelParameterError("H must be a matrix")
        n_r, n_t = H.shape
        if not n_r >= n_t >= 1:
            raise ChannelParameterError(f"need N_R >= N_T >= 1, got N_R={n_r}, N_T={n_t}")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def n_t(self) -> int:
        return self.H.shape[1]

    @property
    def n_r(self) -> int:
        return self.H.shape[0]

    @cached_property
    def gram(self) -> np.ndarray:
        return self.H.conj().T @ self.H

    @cached_property
    def gram_inverse(self) -> np.ndarray:
        g = self.gram
        if np.linalg.cond(g) > MAX_GRAM_CONDITION:
            raise SingularChannelError("Gram matrix is numerically singular")
        return np.linalg.inv(g)


def sample_channel(n_t: int, n_r: int, rng: np.random.Generator) -> ChannelRealization:
    if not n_r >= n_t >= 1:
        raise ChannelParameterError(f"need N_R >= N_T >= 1, got N_R={n_r}, N_T={n_t}")
    return ChannelRealization(complex_normal(rng, (n_r, n_t)))


def transmit(ch: ChannelRealization, x_s, snr: float, rng: np.random.Generator | None,
             noise: bool = True) -> np.ndarray:
    """``sqrt(snr/N_T) H x + n`` with unit-variance complex noise."""
    x_s = np.asarray(x_s, dtype=np.complex128)
    if x_s.shape != (ch.n_t,):
        raise ChannelParameterError(f"expected {ch.n_t} symbols, got shape {x_s.shape}")
    if snr <= 0:
        raise ChannelParameterError("snr must be positive")
    y = np.sqrt(snr / ch.n_t) * (ch.H @ x_s)
    if noise:
        y = y + complex_normal(rng, ch.n_r)
    return y


@dataclass(frozen=True, eq=False)
class ZfDetector:
    pseudo_inverse: np.ndarray = field(repr=False)
    gains: np.ndarray
    gram: np.ndarray = field(repr=False)

    @classmethod
    def from_channel(cls, ch: ChannelRealization) -> ZfDetector:
        # QR keeps the left inverse accurate; G^-1 diag gives the gains
        q, r = np.linalg.qr(ch.H)
        if np.linalg.cond(r) ** 2 > MAX_GRAM_CONDITION:
            raise SingularChannelError("Gram matrix is numerically singular")
        r_inv = np.linalg.solve(r, np.eye(ch.n_t))
        pinv = r_inv @ q.conj().T
        g_inv_diag = np.sum(np.abs(r_inv) ** 2, axis=1)
        return cls(pseudo_inverse=pinv, gains=1.0 / g_inv_diag, gram=ch.gram)

    @property
    def n_t(self) -> int:
        return self.pseudo_inverse.shape[0]


def zf_detect(det: ZfDetector, y_s) -> np.ndarray:
    y_s = np.asarray(y_s)
    if y_s.shape[0] != det.pseudo_inverse.shape[1]:
        raise ChannelParameterError("received vector does not match the detector")
    return det.pseudo_inverse @ y_s


def post_processing_gains(ch: ChannelRealization) -> np.ndarray:
    """Per-stream SNR multipliers ``1 / [(H^H H)^-1]_ii``."""
    return 1.0 / np.real(np.diag(ch.gram_inverse))


def noise_autocorrelation(ch: ChannelRealization, sigma2: float = 1.0) -> np.ndarray:
    return sigma2 * ch.gram_inverse


def real_lattice_basis(ch: ChannelRealization) -> np.ndarray:
    H = ch.H if isinstance(ch, ChannelRealization) else np.asarray(ch)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def orthogonality_defect(basis: np.ndarray) -> float:
    """Product of column norms over the lattice volume, computed in log space."""
    basis = np.asarray(basis, dtype=np.float64)
    sign, logdet = np.linalg.slogdet(basis.T @ basis)
    if sign <= 0 or not np.isfinite(logdet):
        raise SingularChannelError("lattice basis is rank deficient")
    log_norms = np.log(np.linalg.norm(basis, axis=0)).sum()
    return float(np.exp(log_norms - 0.5 * logdet))


def pch_scale(n_t: int, snr: float, array_gain: bool) -> float:
    """Amplitude the quantizer divides out for :func:`pch_transmit` output."""
    return float(np.sqrt(snr / n_t) if array_gain else np.sqrt(snr))


def pch_transmit(n_t: int, n_r: int, x_s, snr: float, array_gain: bool,
                 rng: np.random.Generator) -> np.ndarray:
    """Equivalent parallel channel under perfect channel hardening.

    With ``array_gain`` the ZF output is ``sqrt(snr/N_T) x + u``, ``u ~ CN(0, 1/N_R)``.
    Without it each stream is ``sqrt(snr) x + CN(0, 1)``, i.e. per-symbol SNR ``snr``.
    """
    x_s = np.asarray(x_s, dtype=np.complex128)
    if snr <= 0:
        raise ChannelParameterError("snr must be positive")
    if array_gain:
        return np.sqrt(snr / n_t) * x_s + complex_normal(rng, x_s.shape, 1.0 / n_r)
    return np.sqrt(snr) * x_s + complex_normal(rng, x_s.shape)
