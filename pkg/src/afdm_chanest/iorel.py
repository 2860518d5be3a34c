"""DAFT-domain input/output kernels, ICCI approximations, SINR and SINR loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .daft import Domain, DaftFrame, _samples
from .equalize import lmmse_matrix
from .params import ConfigError, WaveformConfig, split_nearest


@dataclass(frozen=True)
class EquivalentShift:
    chi: float
    upsilon: int
    gamma: float


def alpha(cfg: WaveformConfig, m, n, k, l):
    N = cfg.n
    m = np.asarray(m, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    c1, c2 = cfg.chirp_rate, cfg.c2
    return np.exp(-2j * np.pi / N * (-N * c1 * l**2 + (n + k) * l + N * c2 * (m**2 - n**2)))


def dirichlet(theta, n):
    """(1/N) * sum_{t<N} exp(-j 2 pi theta t / N). Periodic in theta with period N."""
    return _kernels.dirichlet(theta, n)


def f_kernel(cfg: WaveformConfig, m, n, k, l):
    theta = np.asarray(m, dtype=np.float64) - np.asarray(n, dtype=np.float64) + cfg.chirp_shift * l - k
    return dirichlet(theta, cfg.n)


def f_kernel_sum(cfg: WaveformConfig, m, n, k, l):
    """Explicit N-term sum; reference for :func:`f_kernel`."""
    theta = np.asarray(m, dtype=np.float64) - np.asarray(n, dtype=np.float64) + cfg.chirp_shift * l - k
    t = np.arange(cfg.n)
    return np.exp(-2j * np.pi * np.multiply.outer(theta, t) / cfg.n).sum(axis=-1) / cfg.n


def g_kernel(cfg: WaveformConfig, m, n, k, l):
    return alpha(cfg, m, n, k, l) * f_kernel(cfg, m, n, k, l)


def j_kernel(cfg: WaveformConfig, m, n, chi):
    return dirichlet(np.asarray(m, dtype=np.float64) - np.asarray(n, dtype=np.float64) - chi, cfg.n)


def equivalent_shift(cfg: WaveformConfig, l, k) -> EquivalentShift:
    chi = -cfg.chirp_shift * l + k
    upsilon, gamma = split_nearest(chi)
    return EquivalentShift(chi=chi, upsilon=int(upsilon), gamma=gamma)


def _window_offsets(n, xi):
    if 2 * xi + 1 >= n:
        lo = -(n // 2)
        return np.arange(lo, lo + n)
    return np.arange(-xi, xi + 1)


def approx_output(cfg: WaveformConfig, x, paths, regime="fdfd", xi=None) -> DaftFrame:
    """Truncated I/O relation keeping the 2*xi+1 principal taps per path.

    ``regime="idfd"`` centres the taps on the integer Doppler with the
    fractional Doppler as residual (delays must be integers); ``"fdfd"``
    centres them on the rounded equivalent shift. A window that covers all N
    taps reproduces the exact output.
    """
    x = _samples(cfg, x, Domain.DAFT)
    N = cfg.n
    xi = cfg.xi if xi is None else xi
    q = _window_offsets(N, xi)[None, :]
    m = np.arange(N)[:, None]
    y = np.zeros(N, dtype=np.complex128)
    for p in paths:
        l, k = p.delay_norm, p.doppler_norm
        if regime == "idfd":
            if not float(l).is_integer():
                raise ConfigError("idfd approximation needs integer delays")
            kbar, kappa = split_nearest(k)
            centre = -cfg.chirp_shift * l + kbar
            frac = kappa
        elif regime == "fdfd":
            shift = equivalent_shift(cfg, l, k)
            centre, frac = shift.upsilon, shift.gamma
        else:
            raise ConfigError(f"unknown regime {regime!r}")
        nq = np.mod(np.rint(m - q - centre), N).astype(int)
        taps = alpha(cfg, m, nq, k, l) * dirichlet(q - frac, N)
        y += p.gain * (taps * x[nq]).sum(axis=1)
    return DaftFrame(y, Domain.DAFT)


def sinr_per_subcarrier(h_eff, noise_variance: float) -> np.ndarray:
    """Post-LMMSE SINR per chirp subcarrier; +inf where the denominator vanishes."""
    h = np.asarray(h_eff)
    w = lmmse_matrix(h, noise_variance)
    t = w @ h
    signal = np.abs(np.diag(t)) ** 2
    interference = (np.abs(t) ** 2).sum(axis=1) - signal
    noise = noise_variance * (np.abs(w) ** 2).sum(axis=1)
    denom = interference + noise
    if noise_variance == 0:
        # with no noise, leftover interference is round-off from the solve
        denom = np.where(interference <= 1e-20 * signal, 0.0, denom)
    with np.errstate(divide="ignore"):
        return np.where(denom > 0, signal / np.where(denom > 0, denom, 1.0), np.inf)


def peak_gain(gamma, n):
    """|sin(pi g) / (N sin(pi g / N))|, the surviving peak amplitude at fractional shift g."""
    return np.abs(dirichlet(gamma, n))


def sinr_loss(cfg: WaveformConfig, iota, kappa):
    """SINR loss in dB, 20*log10|.|^2 of the peak amplitude at the residual shift.

    ``iota`` and ``kappa`` are the fractional delay and Doppler; iota = 0 is
    the IDFD case.
    """
    frac_shift = -cfg.chirp_shift * np.asarray(iota, dtype=np.float64) + np.asarray(kappa, dtype=np.float64)
    gamma = frac_shift - np.floor(frac_shift + 0.5)
    return 20 * np.log10(peak_gain(gamma, cfg.n) ** 2)


def sinr_loss_surface(cfg: WaveformConfig, points: int = 101):
    """(iota, kappa, loss_db) over a square grid on [-0.5, 0.5]^2."""
    grid = np.linspace(-0.5, 0.5, points)
    iota, kappa = np.meshgrid(grid, grid, indexing="ij")
    return iota.ravel(), kappa.ravel(), sinr_loss(cfg, iota, kappa).ravel()
