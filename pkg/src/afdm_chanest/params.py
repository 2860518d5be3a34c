"""Waveform and channel configuration plus the grid quantities derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

SPEED_OF_LIGHT = 3e8  # m/s, rounded value used for the doubly-underspread numbers


class ConfigError(ValueError):
    pass


class GuardDoesNotFitError(ConfigError):
    pass


def split_nearest(value):
    """Split ``value`` into (integer, fraction) with fraction in [-0.5, 0.5).

    Exact half-way values go up, so the fraction lands on -0.5.
    """
    integer = math.floor(value + 0.5)
    return integer, value - integer


def _ceil(x):
    # guard against 3.0000000000000004 style noise from products like tau*B
    return int(math.ceil(round(x, 9)))


@dataclass(frozen=True)
class ChannelSpec:
    tau_max: float
    nu_max: float
    num_paths: int = 1

    def __post_init__(self):
        if self.tau_max < 0 or self.nu_max < 0:
            raise ConfigError("tau_max and nu_max must be nonnegative")
        if self.num_paths < 1:
            raise ConfigError("num_paths must be >= 1")


@dataclass(frozen=True)
class WaveformConfig:
    """AFDM grid parameters.

    ``c1`` and ``cpp_len`` are ``None`` on a partial config and get filled in
    by :func:`derive_limits`.
    """

    n_subcarriers: int
    subcarrier_spacing: float
    xi: int
    c2: float = 0.0
    c1: float | None = None
    cpp_len: int | None = None

    def __post_init__(self):
        if self.n_subcarriers < 2:
            raise ConfigError("n_subcarriers must be >= 2")
        if self.subcarrier_spacing <= 0:
            raise ConfigError("subcarrier_spacing must be positive")
        if not 0 < self.xi <= self.n_subcarriers:
            raise ConfigError(f"xi must satisfy 0 < xi <= N, got xi={self.xi}, N={self.n_subcarriers}")
        if self.cpp_len is not None and not 0 <= self.cpp_len <= self.n_subcarriers:
            raise ConfigError("cpp_len must lie in [0, N]")

    @property
    def n(self) -> int:
        return self.n_subcarriers

    @property
    def bandwidth(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing

    @property
    def symbol_duration(self) -> float:
        return 1.0 / self.subcarrier_spacing

    @property
    def chirp_rate(self) -> float:
        if self.c1 is None:
            raise ConfigError("c1 is unset; complete the config with derive_limits first")
        return self.c1

    @property
    def chirp_shift(self) -> float:
        """2*N*c1, the DAFT-domain displacement per unit of normalized delay."""
        return 2 * self.n_subcarriers * self.chirp_rate


@dataclass(frozen=True)
class GridLimits:
    k_max: int
    l_max: int
    q_total: int
    q1: int
    q2: int

    @property
    def window(self) -> int:
        return self.q_total + 1


@dataclass(frozen=True)
class ChannelPath:
    gain: complex
    delay_norm: float
    doppler_norm: float

    @property
    def delay_parts(self):
        return split_nearest(self.delay_norm)

    @property
    def doppler_parts(self):
        return split_nearest(self.doppler_norm)

    def gain_for(self, convention="delayed", n=None):
        """Gain under the chosen channel convention.

        ``"delayed"`` keeps the Doppler phasor referenced to t - tau (the default);
        ``"absolute"`` references it to t, which is the same channel with an extra
        exp(j 2 pi k l / N) on the gain.
        """
        if convention == "delayed":
            return self.gain
        if convention == "absolute":
            if n is None:
                raise ConfigError("n is required for the absolute convention")
            return self.gain * np.exp(2j * np.pi * self.doppler_norm * self.delay_norm / n)
        raise ConfigError(f"unknown channel convention {convention!r}")


def grid_limits(k_max: int, l_max: int, xi: int) -> GridLimits:
    q1 = k_max + xi
    q = (l_max + 1) * (2 * q1 + 1) - 1
    return GridLimits(k_max=k_max, l_max=l_max, q_total=q, q1=q1, q2=q - q1)


def derive_limits(spec: ChannelSpec, cfg: WaveformConfig, pilot: bool = False, cpp_len: int | None = None):
    """Complete ``cfg`` (c1, cpp_len) and compute its :class:`GridLimits`.

    With ``pilot=True`` the guard band 2Q+1 must fit inside N.
    """
    n = cfg.n_subcarriers
    b = cfg.bandwidth
    k_max = _ceil(n * spec.nu_max / b)
    l_max = _ceil(spec.tau_max * b)
    limits = grid_limits(k_max, l_max, cfg.xi)
    c1 = (2 * (k_max + cfg.xi) + 1) / (2 * n)
    if cpp_len is None:
        cpp_len = cfg.cpp_len if cfg.cpp_len is not None else l_max
    if cpp_len < l_max:
        raise ConfigError(f"cpp_len={cpp_len} is shorter than l_max={l_max}")
    if pilot and n < 2 * limits.q_total + 1:
        raise GuardDoesNotFitError(
            f"guard does not fit: N={n} < 2Q+1={2 * limits.q_total + 1} (Q={limits.q_total})"
        )
    return limits, replace(cfg, c1=c1, cpp_len=cpp_len)


@dataclass(frozen=True)
class UnderspreadReport:
    lhs: float
    rhs: float
    holds: bool
    stationary_symbols: int | None


def check_doubly_underspread(
    spec: ChannelSpec,
    scatter_extent: float,
    angular_spread: float,
    symbol_duration: float | None = None,
    ratio: float = 10.0,
    speed_of_light: float = SPEED_OF_LIGHT,
) -> UnderspreadReport:
    """Compare the spread products dtau*dnu and tau_max*nu_max against 1.

    ``holds`` requires each gap in lhs << rhs << 1 to be at least ``ratio``.
    When ``symbol_duration`` is given, also count whole symbols that fit in
    the stationary time 1/dnu.
    """
    if scatter_extent < 0 or angular_spread < 0:
        raise ConfigError("scatter_extent and angular_spread must be nonnegative")
    d_tau = scatter_extent / speed_of_light
    d_nu = 2 * spec.nu_max * math.sin(angular_spread / 2)
    lhs = d_tau * d_nu
    rhs = spec.tau_max * spec.nu_max
    holds = lhs * ratio <= rhs and rhs * ratio <= 1.0
    symbols = None
    if symbol_duration is not None and d_nu > 0:
        symbols = int(math.floor(1.0 / (d_nu * symbol_duration)))
    return UnderspreadReport(lhs=lhs, rhs=rhs, holds=holds, stationary_symbols=symbols)


REGIMES = ("idd", "idfd", "fdfd")


def draw_channel(spec: ChannelSpec, cfg: WaveformConfig, limits: GridLimits, rng, regime="fdfd"):
    """Draw ``spec.num_paths`` paths with uniform delay/Doppler and CN(0, 1/P) gains.

    ``regime`` snaps delay (idfd) or both delay and Doppler (idd) to the
    nearest integer. ``rng`` is a seed or a numpy Generator.
    """
    regime = regime.lower()
    if regime not in REGIMES:
        raise ConfigError(f"unknown regime {regime!r}")
    rng = np.random.default_rng(rng)
    p = spec.num_paths
    tau = rng.uniform(0.0, spec.tau_max, p)
    nu = rng.uniform(-spec.nu_max, spec.nu_max, p)
    gains = np.sqrt(0.5 / p) * (rng.standard_normal(p) + 1j * rng.standard_normal(p))
    delays = tau * cfg.bandwidth
    dopplers = nu / cfg.subcarrier_spacing
    if regime in ("idd", "idfd"):
        delays = np.array([split_nearest(d)[0] for d in delays], dtype=float)
    if regime == "idd":
        dopplers = np.array([split_nearest(k)[0] for k in dopplers], dtype=float)
    delays = np.clip(delays, 0, limits.l_max)
    dopplers = np.clip(dopplers, -limits.k_max, limits.k_max)
    return [ChannelPath(complex(h), float(l), float(k)) for h, l, k in zip(gains, delays, dopplers)]


REFERENCE = {
    "n_subcarriers": 256,
    "subcarrier_spacing_hz": 1e3,
    "xi": 4,
    "xi_prime": 5,
    "c2": 0.0,
    "tau_max_s": 1.56e-5,
    "nu_max_hz": 2e3,
    "num_paths": 5,
    "seed": 0,
}


def reference_setup(n_subcarriers=256, xi=4, num_paths=5, pilot=True):
    """Channel spec, completed config and limits for the reference parameter set."""
    spec = ChannelSpec(tau_max=REFERENCE["tau_max_s"], nu_max=REFERENCE["nu_max_hz"], num_paths=num_paths)
    cfg = WaveformConfig(n_subcarriers=n_subcarriers, subcarrier_spacing=REFERENCE["subcarrier_spacing_hz"], xi=xi)
    limits, cfg = derive_limits(spec, cfg, pilot=pilot)
    return spec, cfg, limits
