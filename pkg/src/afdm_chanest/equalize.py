"""LMMSE equalization and Gray-labelled square QAM."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg


class SingularSystemError(np.linalg.LinAlgError):
    pass


def _gray(n):
    return n ^ (n >> 1)


@dataclass(frozen=True, eq=False)
class QamAlphabet:
    """Square M-QAM, unit average energy, Gray labels per axis.

    Bit b = 0 maps to the positive level on its axis; for 4-QAM the pair
    (b1 b0) maps to ((1 - 2 b1) + j (1 - 2 b0)) / sqrt(2).
    """

    order: int
    points: np.ndarray
    labels: np.ndarray  # (order, bits_per_symbol) of 0/1
    levels: np.ndarray  # per-axis amplitudes, indexed by Gray-decoded position
    axis_bits: np.ndarray  # per-axis bit patterns for each level

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]


@lru_cache(maxsize=None)
def qam_alphabet(order: int = 4) -> QamAlphabet:
    side = int(round(np.sqrt(order)))
    k = int(round(np.log2(order)))
    if side * side != order or k % 2 or order < 4:
        raise ValueError(f"order must be an even power of two >= 4, got {order}")
    half = k // 2
    # position 0 is the most positive level; adjacent positions differ by one bit
    raw = np.arange(side - 1, -side, -2, dtype=float)
    axis_bits = np.array([[(_gray(i) >> (half - 1 - b)) & 1 for b in range(half)] for i in range(side)])
    scale = np.sqrt(2 * (order - 1) / 3)
    levels = raw / scale
    points, labels = [], []
    for i in range(side):
        for q in range(side):
            points.append(levels[i] + 1j * levels[q])
            labels.append(np.concatenate([axis_bits[i], axis_bits[q]]))
    return QamAlphabet(order, np.array(points), np.array(labels, dtype=np.int8), levels, axis_bits)


def qam_map(bits, order: int = 4) -> np.ndarray:
    alph = qam_alphabet(order)
    bits = np.asarray(bits, dtype=np.int64).reshape(-1, alph.bits_per_symbol)
    half = alph.bits_per_symbol // 2
    weights = 1 << np.arange(half - 1, -1, -1)
    gi = bits[:, :half] @ weights
    gq = bits[:, half:] @ weights
    lookup = np.empty(len(alph.levels), dtype=int)
    lookup[[_gray(i) for i in range(len(alph.levels))]] = np.arange(len(alph.levels))
    return alph.levels[lookup[gi]] + 1j * alph.levels[lookup[gq]]


def qam_demap(symbols, order: int = 4) -> np.ndarray:
    """Nearest-point hard decision, returned as a flat bit array."""
    alph = qam_alphabet(order)
    symbols = np.asarray(symbols)
    levels = alph.levels

    def axis(v):
        return np.abs(v[:, None] - levels[None, :]).argmin(axis=1)

    i = axis(symbols.real)
    q = axis(symbols.imag)
    return np.concatenate([alph.axis_bits[i], alph.axis_bits[q]], axis=1).reshape(-1)


def lmmse_matrix(h_eff, noise_variance: float) -> np.ndarray:
    """W = (H^H H + s2 I)^{-1} H^H, via a Hermitian solve."""
    h = np.asarray(h_eff)
    gram = h.conj().T @ h + noise_variance * np.eye(h.shape[1])
    try:
        return scipy.linalg.solve(gram, h.conj().T, assume_a="her")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularSystemError("regularized normal matrix is singular") from exc


def equalize(h_eff, y, noise_variance: float) -> np.ndarray:
    """x_hat = W y without forming W."""
    h = np.asarray(h_eff)
    gram = h.conj().T @ h + noise_variance * np.eye(h.shape[1])
    try:
        return scipy.linalg.solve(gram, h.conj().T @ np.asarray(y), assume_a="her")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularSystemError("regularized normal matrix is singular") from exc
