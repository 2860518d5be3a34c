"""Numeric inner loops.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical semantics. The public names at the bottom of this
module point at one or the other. Set ``AFDM_CHANEST_DISABLE_NUMBA=1`` (or run
without numba installed) to force the numpy path.
"""

import math
import os

import numpy as np

# |theta| below this (after reduction mod N) uses the series branch of the
# Dirichlet kernel instead of the sin/sin ratio.
DEGENERATE_TOL = 1e-9

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False


def _env_disabled():
    return os.environ.get("AFDM_CHANEST_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = HAS_NUMBA and not _env_disabled()


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def dirichlet_numpy(theta, n):
    """(1/N) * sum_{t=0}^{N-1} exp(-j 2 pi theta t / N), elementwise."""
    theta = np.asarray(theta, dtype=np.float64)
    red = theta - n * np.floor(theta / n + 0.5)
    phase = np.exp(-1j * np.pi * red * (n - 1) / n)
    small = np.abs(red) < DEGENERATE_TOL
    safe = np.where(small, 1.0, red)
    ratio = np.sin(np.pi * safe) / (n * np.sin(np.pi * safe / n))
    series = 1.0 - (np.pi * red) ** 2 * (1.0 - 1.0 / n**2) / 6.0
    return phase * np.where(small, series, ratio)


def effective_channel_numpy(n, c1, c2, gains, delays, dopplers):
    # per path H(m, k) = h * e0 * e^{-j2pi k l/N} * D(m - k + 2Nc1 l - nu); D is N-periodic,
    # so it only depends on (m - k) mod N. The c2 chirp factors out of the sum.
    idx = np.arange(n, dtype=np.float64)
    diff = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    out = np.zeros((n, n), dtype=np.complex128)
    for h, l, nu in zip(gains, delays, dopplers):
        e0 = np.exp(-2j * np.pi / n * (-n * c1 * l * l + nu * l))
        col = np.exp(-2j * np.pi * idx * l / n)
        d = dirichlet_numpy(idx + 2 * n * c1 * l - nu, n)
        out += (h * e0) * d[diff] * col[None, :]
    if c2 != 0:
        out *= np.exp(-2j * np.pi * c2 * idx**2)[:, None] * np.exp(2j * np.pi * c2 * idx**2)[None, :]
    return out


def pilot_column_numpy(n, c1, c2, rows, col, delay, doppler):
    """G(m, col, doppler, delay) for every m in ``rows``."""
    m = np.asarray(rows, dtype=np.float64)
    alpha = np.exp(
        -2j * np.pi / n * (-n * c1 * delay * delay + (col + doppler) * delay + n * c2 * (m**2 - col * col))
    )
    return alpha * dirichlet_numpy(m - col + 2 * n * c1 * delay - doppler, n)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

def _dirichlet_scalar(theta, n):
    red = theta - n * math.floor(theta / n + 0.5)
    phase = complex(math.cos(math.pi * red * (n - 1) / n), -math.sin(math.pi * red * (n - 1) / n))
    if abs(red) < DEGENERATE_TOL:
        mag = 1.0 - (math.pi * red) ** 2 * (1.0 - 1.0 / (n * n)) / 6.0
    else:
        mag = math.sin(math.pi * red) / (n * math.sin(math.pi * red / n))
    return phase * mag


def _dirichlet_array(theta, n):
    flat = theta.ravel()
    out = np.empty(flat.size, dtype=np.complex128)
    for i in range(flat.size):
        out[i] = _dirichlet_scalar(flat[i], n)
    return out.reshape(theta.shape)


def _effective_channel_loop(n, c1, c2, gains, delays, dopplers):
    out = np.zeros((n, n), dtype=np.complex128)
    two_pi_n = 2.0 * math.pi / n
    d = np.empty(n, dtype=np.complex128)
    col = np.empty(n, dtype=np.complex128)
    for p in range(gains.size):
        l = delays[p]
        nu = dopplers[p]
        ph0 = -two_pi_n * (-n * c1 * l * l + nu * l)
        h = gains[p] * complex(math.cos(ph0), math.sin(ph0))
        for j in range(n):
            d[j] = _dirichlet_scalar(j + 2.0 * n * c1 * l - nu, n)
            col[j] = h * complex(math.cos(two_pi_n * j * l), -math.sin(two_pi_n * j * l))
        for m in range(n):
            for k in range(n):
                j = m - k
                if j < 0:
                    j += n
                out[m, k] += col[k] * d[j]
    if c2 != 0.0:
        for m in range(n):
            for k in range(n):
                ph = -2.0 * math.pi * c2 * (m * m - k * k)
                out[m, k] *= complex(math.cos(ph), math.sin(ph))
    return out


def _pilot_column_loop(n, c1, c2, rows, col, delay, doppler):
    out = np.empty(rows.size, dtype=np.complex128)
    two_pi_n = 2.0 * math.pi / n
    for i in range(rows.size):
        m = rows[i]
        ph = -two_pi_n * (-n * c1 * delay * delay + (col + doppler) * delay + n * c2 * (m * m - col * col))
        out[i] = complex(math.cos(ph), math.sin(ph)) * _dirichlet_scalar(m - col + 2.0 * n * c1 * delay - doppler, n)
    return out


if HAS_NUMBA:
    _dirichlet_scalar = numba.njit(cache=True)(_dirichlet_scalar)
    _dirichlet_array = numba.njit(cache=True)(_dirichlet_array)
    _effective_channel_loop = numba.njit(cache=True)(_effective_channel_loop)
    _pilot_column_loop = numba.njit(cache=True)(_pilot_column_loop)


def dirichlet_numba(theta, n):
    theta = np.asarray(theta, dtype=np.float64)
    out = _dirichlet_array(np.ascontiguousarray(theta.ravel()), float(n))
    return out.reshape(theta.shape)


def effective_channel_numba(n, c1, c2, gains, delays, dopplers):
    return _effective_channel_loop(
        int(n),
        float(c1),
        float(c2),
        np.ascontiguousarray(gains, dtype=np.complex128),
        np.ascontiguousarray(delays, dtype=np.float64),
        np.ascontiguousarray(dopplers, dtype=np.float64),
    )


def pilot_column_numba(n, c1, c2, rows, col, delay, doppler):
    return _pilot_column_loop(
        int(n), float(c1), float(c2), np.ascontiguousarray(rows, dtype=np.float64), float(col), float(delay), float(doppler)
    )


BACKENDS = {
    "numpy": (dirichlet_numpy, effective_channel_numpy, pilot_column_numpy),
}
if HAS_NUMBA:
    BACKENDS["numba"] = (dirichlet_numba, effective_channel_numba, pilot_column_numba)

BACKEND = "numba" if USE_NUMBA else "numpy"
dirichlet, effective_channel, pilot_column = BACKENDS[BACKEND]
