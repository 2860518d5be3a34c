"""Doubly selective channel: exact time-domain application and matrix models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .daft import DaftFrame, Domain, _samples, daft_matrix, demodulate, kernel
from .params import ChannelPath, ConfigError, GridLimits, WaveformConfig


@dataclass(frozen=True, eq=False)
class TimeChannel:
    h_t: np.ndarray


@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    h_eff: np.ndarray
    constituents: list = field(default_factory=list)

    def __matmul__(self, other):
        return self.h_eff @ np.asarray(other)


def _path_arrays(paths, convention="delayed", n=None):
    gains = np.array([p.gain_for(convention, n) for p in paths], dtype=np.complex128)
    delays = np.array([p.delay_norm for p in paths], dtype=np.float64)
    dopplers = np.array([p.doppler_norm for p in paths], dtype=np.float64)
    return gains, delays, dopplers


def check_paths(paths, limits: GridLimits | None):
    if limits is None:
        return
    for p in paths:
        if not (0 <= p.delay_norm <= limits.l_max and abs(p.doppler_norm) <= limits.k_max):
            raise ConfigError(
                f"path (l={p.delay_norm}, k={p.doppler_norm}) outside limits "
                f"l_max={limits.l_max}, k_max={limits.k_max}"
            )


def noise(n, noise_variance, rng):
    if noise_variance <= 0:
        return np.zeros(n, dtype=np.complex128)
    rng = np.random.default_rng(rng)
    return np.sqrt(noise_variance / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def delayed_synthesis(cfg: WaveformConfig, x, delay: float) -> np.ndarray:
    """IDAFT synthesis s(nbar - delay) for nbar = 0..N-1, at real-valued delay.

    Negative arguments fall on the analytic continuation, which coincides
    with the chirp-periodic prefix at integer delays.
    """
    N = cfg.n
    k = np.arange(N, dtype=np.float64)
    u = np.asarray(x, dtype=np.complex128) * np.exp(2j * np.pi * cfg.c2 * k**2)
    t = k - delay
    return np.exp(2j * np.pi * cfg.chirp_rate * t**2) * np.fft.ifft(u * np.exp(-2j * np.pi * delay * k / N), norm="ortho")


def apply_channel(
    cfg: WaveformConfig,
    x,
    paths,
    noise_variance: float = 0.0,
    rng=None,
    limits: GridLimits | None = None,
    convention: str = "delayed",
) -> DaftFrame:
    """Received time samples r (CPP already discarded) for DAFT-domain symbols ``x``."""
    x = _samples(cfg, x, Domain.DAFT)
    check_paths(paths, limits)
    N = cfg.n
    nbar = np.arange(N, dtype=np.float64)
    r = np.zeros(N, dtype=np.complex128)
    for p in paths:
        l, k = p.delay_norm, p.doppler_norm
        r += p.gain_for(convention, N) * np.exp(2j * np.pi * k * (nbar - l) / N) * delayed_synthesis(cfg, x, l)
    return DaftFrame(r + noise(N, noise_variance, rng), Domain.TIME)


def apply_channel_dense(cfg: WaveformConfig, x, paths) -> np.ndarray:
    """Same noiseless output as :func:`apply_channel`, by direct kernel evaluation."""
    x = _samples(cfg, x, Domain.DAFT)
    N = cfg.n
    nbar = np.arange(N, dtype=np.float64)[:, None]
    n = np.arange(N, dtype=np.float64)[None, :]
    r = np.zeros(N, dtype=np.complex128)
    for p in paths:
        l, k = p.delay_norm, p.doppler_norm
        r += p.gain * np.exp(2j * np.pi * k * (nbar[:, 0] - l) / N) * (kernel(cfg, nbar - l, n) @ x)
    return r


def apply_channel_linear(cfg: WaveformConfig, extended, paths) -> np.ndarray:
    """Integer-delay channel acting on a CPP-extended sequence, prefix then dropped."""
    L = cfg.cpp_len
    extended = np.asarray(extended, dtype=np.complex128)
    N = cfg.n
    nbar = np.arange(N)
    r = np.zeros(N, dtype=np.complex128)
    for p in paths:
        l = int(round(p.delay_norm))
        if l != p.delay_norm or l > L:
            raise ConfigError("linear model needs integer delays no longer than the prefix")
        r += p.gain * np.exp(2j * np.pi * p.doppler_norm * (nbar - l) / N) * extended[L + nbar - l]
    return r


def cpp_gamma(cfg: WaveformConfig, delay: int) -> np.ndarray:
    """Diagonal of Gamma_CPP for an integer delay."""
    N, c1 = cfg.n, cfg.chirp_rate
    nbar = np.arange(N, dtype=np.float64)
    phase = np.exp(-2j * np.pi * c1 * (N**2 - 2 * N * (delay - nbar)))
    return np.where(nbar < delay, phase, 1.0)


def _is_integer(v):
    return float(v).is_integer()


def build_time_channel(cfg: WaveformConfig, paths) -> TimeChannel:
    N = cfg.n
    h_t = np.zeros((N, N), dtype=np.complex128)
    rows = np.arange(N)
    fractional = []
    for p in paths:
        if _is_integer(p.delay_norm) and _is_integer(p.doppler_norm):
            l, k = int(p.delay_norm), int(p.doppler_norm)
            z = np.exp(2j * np.pi * k * np.arange(N) / N)
            block = np.zeros((N, N), dtype=np.complex128)
            cols = (rows - l) % N
            block[rows, cols] = z[cols]
            h_t += p.gain * cpp_gamma(cfg, l)[:, None] * block
        else:
            fractional.append(p)
    if fractional:
        # columns of the x -> r map, then s -> r via x = A s
        nbar = np.arange(N, dtype=np.float64)[:, None]
        n = np.arange(N, dtype=np.float64)[None, :]
        m = np.zeros((N, N), dtype=np.complex128)
        for p in fractional:
            l, k = p.delay_norm, p.doppler_norm
            m += p.gain * np.exp(2j * np.pi * k * (nbar - l) / N) * kernel(cfg, nbar - l, n)
        h_t += m @ daft_matrix(cfg)
    return TimeChannel(h_t)


def build_effective_channel(cfg: WaveformConfig, paths, keep_constituents: bool = False, convention="delayed"):
    """H_eff from the closed-form DAFT-domain kernel, summed over paths."""
    N = cfg.n
    gains, delays, dopplers = _path_arrays(paths, convention, N)
    if len(paths) == 0:
        return EffectiveChannel(np.zeros((N, N), dtype=np.complex128))
    h_eff = _kernels.effective_channel(N, cfg.chirp_rate, cfg.c2, gains, delays, dopplers)
    constituents = []
    if keep_constituents:
        constituents = [
            _kernels.effective_channel(N, cfg.chirp_rate, cfg.c2, np.ones(1), delays[i : i + 1], dopplers[i : i + 1])
            for i in range(len(paths))
        ]
    return EffectiveChannel(h_eff, constituents)


def transmit(cfg, x, paths, noise_variance=0.0, rng=None, convention="delayed") -> DaftFrame:
    """Modulate, pass through the channel, demodulate: y = H_eff x + w."""
    r = apply_channel(cfg, x, paths, noise_variance, rng, convention=convention)
    return demodulate(cfg, r)

