"""Pilot-embedded frames, truncation windows and matched-filter templates."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .daft import DaftFrame, Domain, _samples
from .equalize import qam_alphabet, qam_map
from .iorel import dirichlet
from .params import ConfigError, GridLimits, GuardDoesNotFitError, WaveformConfig


@dataclass(frozen=True, eq=False)
class PilotFrame:
    x: DaftFrame
    pilot_index: int
    pilot_value: complex
    limits: GridLimits
    data_index: np.ndarray
    bits: np.ndarray

    @property
    def guard_index(self) -> np.ndarray:
        n = len(self.x)
        offsets = np.arange(-self.limits.q_total, self.limits.q_total + 1)
        offsets = offsets[offsets != 0]
        return np.mod(self.pilot_index + offsets, n)

    @property
    def window_rows(self) -> np.ndarray:
        """Absolute DAFT indices of the truncation window, n_p - Q2 .. n_p + Q1 (mod N)."""
        n = len(self.x)
        return np.mod(self.pilot_index + window_offsets(self.limits), n)


@dataclass(frozen=True, eq=False)
class TruncatedObservation:
    y_t: np.ndarray
    pilot_index: int
    q1: int
    q2: int

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.q2, self.q1 + 1)

    def __len__(self):
        return len(self.y_t)


def window_offsets(limits: GridLimits) -> np.ndarray:
    return np.arange(-limits.q2, limits.q1 + 1)


def build_pilot_frame(
    cfg: WaveformConfig,
    limits: GridLimits,
    pilot_power_db: float = 30.0,
    rng=None,
    pilot_index: int | None = None,
    order: int = 4,
    data_power: float = 1.0,
) -> PilotFrame:
    """Single pilot at n_p (default Q), 2Q zero guards around it, QAM data elsewhere."""
    n = cfg.n
    q = limits.q_total
    if n < 2 * q + 1:
        raise GuardDoesNotFitError(f"guard does not fit: N={n} < 2Q+1={2 * q + 1}")
    n_p = q if pilot_index is None else int(pilot_index) % n
    rng = np.random.default_rng(rng)
    occupied = np.mod(n_p + np.arange(-q, q + 1), n)
    mask = np.ones(n, dtype=bool)
    mask[occupied] = False
    data_index = np.flatnonzero(mask)
    k = qam_alphabet(order).bits_per_symbol
    bits = rng.integers(0, 2, size=data_index.size * k, dtype=np.int8)
    x = np.zeros(n, dtype=np.complex128)
    x[data_index] = np.sqrt(data_power) * qam_map(bits, order)
    x_p = np.sqrt(data_power * 10 ** (pilot_power_db / 10))
    x[n_p] = x_p
    return PilotFrame(DaftFrame(x, Domain.DAFT), n_p, complex(x_p), limits, data_index, bits)


def build_dual_frames(cfg, cfg_prime, limits, limits_prime, pilot_power_db=30.0, rng=None, same_payload=False, **kw):
    """Two frames with the same pilot rule but different chirp rates c1 != c1'."""
    if cfg.xi == cfg_prime.xi or cfg.chirp_rate == cfg_prime.chirp_rate:
        raise ConfigError("dual frames need xi != xi' (distinct c1)")
    rng = np.random.default_rng(rng)
    if same_payload:
        seed = rng.integers(2**63)
        return (
            build_pilot_frame(cfg, limits, pilot_power_db, seed, **kw),
            build_pilot_frame(cfg_prime, limits_prime, pilot_power_db, seed, **kw),
        )
    return (
        build_pilot_frame(cfg, limits, pilot_power_db, rng, **kw),
        build_pilot_frame(cfg_prime, limits_prime, pilot_power_db, rng, **kw),
    )


def truncate(cfg: WaveformConfig, y, frame: PilotFrame) -> TruncatedObservation:
    y = _samples(cfg, y, Domain.DAFT)
    return TruncatedObservation(y[frame.window_rows].copy(), frame.pilot_index, frame.limits.q1, frame.limits.q2)


def template_a(cfg: WaveformConfig, frame: PilotFrame, l, k) -> np.ndarray:
    """a_T(l, k): G(m, n_p, k, l) over the truncation window."""
    rows = frame.window_rows.astype(np.float64)
    return _kernels.pilot_column(cfg.n, cfg.chirp_rate, cfg.c2, rows, float(frame.pilot_index), l, k)


def template_t(cfg: WaveformConfig, frame: PilotFrame, chi) -> np.ndarray:
    """T(chi): J(m, n_p, chi) over the truncation window."""
    return dirichlet(window_offsets(frame.limits) - chi, cfg.n)


def full_column(cfg: WaveformConfig, pilot_index: int, l, k) -> np.ndarray:
    rows = np.arange(cfg.n, dtype=np.float64)
    return _kernels.pilot_column(cfg.n, cfg.chirp_rate, cfg.c2, rows, float(pilot_index), l, k)


@dataclass(frozen=True)
class Coherence:
    exact: float
    sinc_approx: float


def mutual_coherence(cfg: WaveformConfig, l1, k1, l2, k2, pilot_index: int = 0) -> Coherence:
    """|a(l1,k1)^H a(l2,k2)| over all N rows, with its sinc approximation."""
    a1 = full_column(cfg, pilot_index, l1, k1)
    a2 = full_column(cfg, pilot_index, l2, k2)
    arg = cfg.chirp_shift * (l2 - l1) - (k2 - k1)
    return Coherence(exact=float(abs(np.vdot(a1, a2))), sinc_approx=float(abs(np.sinc(arg))))


def nmse_a(cfg: WaveformConfig, frame_or_limits, paths, pilot_index: int | None = None) -> float:
    """||I - A_T^H A_T||^2 / ||I||^2 for the truncated template matrix of ``paths``."""
    if isinstance(frame_or_limits, PilotFrame):
        limits = frame_or_limits.limits
        pilot_index = frame_or_limits.pilot_index
    else:
        limits = frame_or_limits
        pilot_index = limits.q_total if pilot_index is None else pilot_index
    rows = np.mod(pilot_index + window_offsets(limits), cfg.n).astype(np.float64)
    cols = np.stack(
        [
            _kernels.pilot_column(cfg.n, cfg.chirp_rate, cfg.c2, rows, float(pilot_index), p.delay_norm, p.doppler_norm)
            for p in paths
        ],
        axis=1,
    )
    gram = cols.conj().T @ cols
    eye = np.eye(len(paths))
    return float(np.linalg.norm(eye - gram) ** 2 / np.linalg.norm(eye) ** 2)


def frame_kinds(frame: PilotFrame) -> np.ndarray:
    kinds = np.full(len(frame.x), "guard", dtype=object)
    kinds[frame.data_index] = "data"
    kinds[frame.pilot_index] = "pilot"
    return kinds


def dump_frame_csv(frame: PilotFrame, path) -> None:
    """Write (index, re, im, kind) rows."""
    x = frame.x.samples
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "re", "im", "kind"])
        for i, (v, kind) in enumerate(zip(x, frame_kinds(frame))):
            writer.writerow([i, repr(float(v.real)), repr(float(v.imag)), kind])
