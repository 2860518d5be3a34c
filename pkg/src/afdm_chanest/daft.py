"""Discrete affine Fourier transform, AFDM (de)modulation and the chirp-periodic prefix."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .params import ConfigError, WaveformConfig


class Domain(enum.Enum):
    TIME = "time"
    DAFT = "daft"


@dataclass(frozen=True, eq=False)
class DaftFrame:
    samples: np.ndarray
    domain: Domain

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.complex128))

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)

    def __len__(self):
        return len(self.samples)


def _samples(cfg: WaveformConfig, x, expected: Domain | None = None):
    if isinstance(x, DaftFrame):
        if expected is not None and x.domain is not expected:
            raise ConfigError(f"expected a {expected.value}-domain frame, got {x.domain.value}")
        x = x.samples
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (cfg.n,):
        raise ConfigError(f"frame length {x.shape} does not match N={cfg.n}")
    return x


def kernel(cfg: WaveformConfig, nbar, n):
    """IDAFT synthesis kernel F_{c1,c2}(nbar, n); ``nbar`` may be fractional."""
    nbar = np.asarray(nbar, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    c1, c2, N = cfg.chirp_rate, cfg.c2, cfg.n
    return np.exp(2j * np.pi * (c1 * nbar**2 + c2 * n**2 + nbar * n / N)) / np.sqrt(N)


def chirp(c, n):
    """Diagonal of Lambda_c = diag(exp(-j 2 pi c k^2))."""
    k = np.arange(n, dtype=np.float64)
    return np.exp(-2j * np.pi * c * k**2)


def daft_matrix(cfg: WaveformConfig) -> np.ndarray:
    """Dense normalized DAFT matrix A = Lambda_c2 F Lambda_c1."""
    N = cfg.n
    k = np.arange(N)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / N) / np.sqrt(N)
    return chirp(cfg.c2, N)[:, None] * dft * chirp(cfg.chirp_rate, N)[None, :]


def modulate(cfg: WaveformConfig, x) -> DaftFrame:
    """s = A^H x via chirp, unitary IFFT, chirp."""
    x = _samples(cfg, x, Domain.DAFT)
    N = cfg.n
    s = np.conj(chirp(cfg.chirp_rate, N)) * np.fft.ifft(np.conj(chirp(cfg.c2, N)) * x, norm="ortho")
    return DaftFrame(s, Domain.TIME)


def demodulate(cfg: WaveformConfig, r) -> DaftFrame:
    """y = A r."""
    r = _samples(cfg, r, Domain.TIME)
    N = cfg.n
    y = chirp(cfg.c2, N) * np.fft.fft(chirp(cfg.chirp_rate, N) * r, norm="ortho")
    return DaftFrame(y, Domain.DAFT)


def modulate_dense(cfg: WaveformConfig, x) -> DaftFrame:
    x = _samples(cfg, x, Domain.DAFT)
    return DaftFrame(daft_matrix(cfg).conj().T @ x, Domain.TIME)


def demodulate_dense(cfg: WaveformConfig, r) -> DaftFrame:
    r = _samples(cfg, r, Domain.TIME)
    return DaftFrame(daft_matrix(cfg) @ r, Domain.DAFT)


def cpp_phase(cfg: WaveformConfig, nbar):
    """Phase applied to s(N + nbar) to form prefix sample nbar < 0."""
    N, c1 = cfg.n, cfg.chirp_rate
    nbar = np.asarray(nbar, dtype=np.float64)
    return np.exp(-2j * np.pi * c1 * (N**2 + 2 * N * nbar))


def add_cpp(cfg: WaveformConfig, s, cpp_len: int | None = None) -> np.ndarray:
    """Prepend the chirp-periodic prefix; returns length L_CPP + N samples."""
    s = _samples(cfg, s, Domain.TIME)
    L = cfg.cpp_len if cpp_len is None else cpp_len
    if L is None:
        raise ConfigError("cpp_len is unset")
    if not 0 <= L <= cfg.n:
        raise ConfigError(f"cpp_len={L} must lie in [0, N={cfg.n}]")
    nbar = np.arange(-L, 0)
    prefix = s[cfg.n + nbar] * cpp_phase(cfg, nbar)
    return np.concatenate([prefix, s])


def remove_cpp(cfg: WaveformConfig, extended, cpp_len: int | None = None) -> DaftFrame:
    L = cfg.cpp_len if cpp_len is None else cpp_len
    extended = np.asarray(extended, dtype=np.complex128)
    if L is None or extended.shape != (L + cfg.n,):
        raise ConfigError("extended frame length does not match L_CPP + N")
    return DaftFrame(extended[L:], Domain.TIME)
