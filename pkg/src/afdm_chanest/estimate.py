"""Matched-filter channel estimation: peak search, Fibonacci-type line search,
dual-frame path resolution and successive cancellation."""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .iorel import alpha, dirichlet
from .params import ChannelPath, ConfigError, GridLimits, WaveformConfig
from .pilot import PilotFrame, TruncatedObservation, template_a


class EstimationError(ValueError):
    pass


# ---------------------------------------------------------------- line search


@dataclass(frozen=True)
class GfsParams:
    """Generalized Fibonacci numbers S_i(a, b, p, q) and the search budget.

    n_g = T_G + 2; the search stops after T_G interval reductions or once the
    interval of uncertainty drops below ``epsilon``.
    """

    a: float = 1.0
    b: float = 1.0
    p: int = 1
    q: int = 1
    n_g: int = 15
    epsilon: float = 1e-4

    def __post_init__(self):
        if not self.a + self.b > 0:
            raise ConfigError("GFS needs a + b > 0")
        if int(self.p) != self.p or int(self.q) != self.q or self.p < 1 or self.q < 1:
            raise ConfigError("GFS needs integer p, q >= 1")
        if int(self.n_g) != self.n_g or self.n_g < 3:
            raise ConfigError("GFS needs integer n_g >= 3")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be nonnegative")

    @property
    def t_g(self) -> int:
        return self.n_g - 2


def gfn(params: GfsParams, i: int) -> float:
    """S_0 = a, S_1 = b, S_i = p S_{i-1} + q S_{i-2}."""
    if i < 0:
        raise ValueError("index must be nonnegative")
    prev, cur = params.a, params.b
    if i == 0:
        return prev
    for _ in range(i - 1):
        prev, cur = cur, params.p * cur + params.q * prev
    return cur


def gfs_ratios(params: GfsParams) -> np.ndarray:
    """eta_g = q S_{N_G-(g+1)} / S_{N_G-(g-1)} for g = 1..T_G."""
    s = [gfn(params, i) for i in range(params.n_g + 1)]
    n = params.n_g
    return np.array([params.q * s[n - (g + 1)] / s[n - (g - 1)] for g in range(1, params.t_g + 1)])


@dataclass
class GfsResult:
    x: float
    interval: tuple
    sizes: list
    evaluations: int

    @property
    def final_iu(self) -> float:
        return self.interval[1] - self.interval[0]


def gfs_optimize(f, x_s: float, x_f: float, params: GfsParams) -> GfsResult:
    """Maximize a unimodal ``f`` on [x_s, x_f]; returns the midpoint of the final bracket.

    Probes sit at fraction min(eta, 1 - eta) from each end. The probe kept
    inside the new bracket is reused when it coincides with a new probe,
    which is always the case for the classic Fibonacci sequence.
    """
    if not x_f > x_s:
        raise ConfigError("zero-length or reversed interval")
    etas = gfs_ratios(params)
    d = x_f - x_s
    sizes = [d]
    cache: dict = {}
    evals = 0

    def value(x):
        nonlocal evals
        for xc, fc in cache.items():
            if abs(xc - x) <= 1e-12 * max(d, 1e-300):
                return xc, fc
        evals += 1
        fx = float(f(x))
        cache[x] = fx
        return x, fx

    for eta in etas:
        if d < params.epsilon:
            break
        step = min(eta, 1 - eta) * d
        x1, f1 = value(x_s + step)
        x2, f2 = value(x_f - step)
        if f1 >= f2:
            x_f = x2
        else:
            x_s = x1
        d = x_f - x_s
        sizes.append(d)
        cache = {x: fx for x, fx in cache.items() if x_s <= x <= x_f}
    return GfsResult(x=0.5 * (x_s + x_f), interval=(x_s, x_f), sizes=sizes, evaluations=evals)


# ----------------------------------------------------------- single-path ops


def estimate_integer_shift(y_t: TruncatedObservation) -> int:
    """Window offset of the strongest sample; ties go to the smallest offset."""
    mag = np.abs(y_t.y_t)
    if not mag.any():
        raise EstimationError("observation is all zero")
    return int(y_t.offsets[np.argmax(mag)])


class CountingObjective:
    """f(gamma) = |T(upsilon + gamma)^H y_T|^2 with an evaluation counter.

    With ``normalized`` the correlation is divided by ||T||^2, the window
    energy of the template. Truncation makes ||T|| depend on gamma, and
    without the division the peak is pulled off the true shift by a few
    thousandths of a sample.
    """

    def __init__(self, y_t: TruncatedObservation, n: int, upsilon: int, normalized: bool = True):
        self.y = y_t.y_t
        self.offsets = y_t.offsets.astype(np.float64)
        self.n = n
        self.upsilon = upsilon
        self.normalized = normalized
        self.count = 0

    def __call__(self, gamma):
        self.count += 1
        t = dirichlet(self.offsets - (self.upsilon + gamma), self.n)
        corr = abs(np.vdot(t, self.y)) ** 2
        if self.normalized:
            return corr / np.vdot(t, t).real
        return corr


@dataclass(frozen=True)
class FractionMethod:
    kind: str = "gfs"  # "grid" or "gfs"
    rho: int = 20
    gfs: GfsParams = field(default_factory=GfsParams)
    normalized: bool = True

    def __post_init__(self):
        if self.kind not in ("grid", "gfs"):
            raise ConfigError(f"unknown fraction method {self.kind!r}")
        if self.kind == "grid" and self.rho < 1:
            raise ConfigError("rho must be >= 1")


def estimate_fraction(y_t: TruncatedObservation, upsilon: int, method: FractionMethod, n: int):
    """Returns (gamma_hat, evaluations)."""
    obj = CountingObjective(y_t, n, upsilon, method.normalized)
    if method.kind == "grid":
        grid = -0.5 + np.arange(method.rho + 1) / method.rho
        vals = np.array([obj(g) for g in grid])
        return float(grid[np.argmax(vals)]), obj.count
    res = gfs_optimize(obj, -0.5, 0.5, method.gfs)
    return res.x, obj.count


@dataclass(frozen=True)
class ResolvedPath:
    delay: float
    doppler: float
    clamped: bool


def resolve_path(chi, chi_prime, c1, c1_prime, n, limits: GridLimits | None = None) -> ResolvedPath:
    """(l, k) from the equivalent shifts seen under two chirp rates."""
    if c1 == c1_prime:
        raise ConfigError("resolve_path needs c1 != c1'")
    l = (chi_prime - chi) / (2 * n * (c1 - c1_prime))
    k = chi + 2 * n * c1 * l
    clamped = False
    if limits is not None:
        lc = min(max(l, 0.0), float(limits.l_max))
        kc = min(max(k, -float(limits.k_max)), float(limits.k_max))
        clamped = (lc, kc) != (l, k)
        l, k = lc, kc
    return ResolvedPath(float(l), float(k), clamped)


def estimate_gain(y_t, template, x_p) -> complex:
    """h = a_T^H y_T / x_p."""
    if x_p == 0:
        raise EstimationError("pilot value is zero")
    y = y_t.y_t if isinstance(y_t, TruncatedObservation) else np.asarray(y_t)
    return complex(np.vdot(template, y) / x_p)


def cancel_path(y_t, h_hat, template, x_p):
    """y - x_p h a_T, keeping the observation type."""
    if isinstance(y_t, TruncatedObservation):
        return TruncatedObservation(y_t.y_t - x_p * h_hat * template, y_t.pilot_index, y_t.q1, y_t.q2)
    return np.asarray(y_t) - x_p * h_hat * template


def decode_integer(upsilon: int, cfg: WaveformConfig):
    """Integer (l, k) from an integer shift: l = round(-upsilon / 2Nc1), k = upsilon + 2Nc1 l."""
    shift = cfg.chirp_shift
    l_bar = int(np.floor(-upsilon / shift + 0.5))
    return l_bar, float(upsilon + shift * l_bar)


def in_grid(l, k, limits: GridLimits) -> bool:
    return 0 <= l <= limits.l_max and abs(k) <= limits.k_max


def ambiguity_range(cfg: WaveformConfig, limits: GridLimits, k_bar: int, samples: int = 201):
    """Integer parts reachable by -2Nc1*iota + k_bar + kappa, iota, kappa in [-0.5, 0.5)."""
    grid = -0.5 + np.arange(samples) / samples
    iota, kappa = np.meshgrid(grid, grid, indexing="ij")
    values = -cfg.chirp_shift * iota + k_bar + kappa
    return np.unique(np.floor(values + 0.5).astype(int))


# ------------------------------------------------------------ full estimators


@dataclass(frozen=True)
class EstimatorOptions:
    """Iteration control.

    The loop ends after ``t_iter`` paths or once the relative change of the
    residual norm is at most ``residual_stop_threshold``. It also ends when
    the residual norm falls to ``residual_floor`` times the initial norm.

    ``pairing="feasible"`` restricts the second-frame peak search to the
    shifts reachable by a path consistent with the first-frame shift.
    ``refine_passes`` adds cyclic re-estimation sweeps after the greedy
    loop: each path is added back to the residual, re-measured near its
    previous shift and cancelled again.
    """

    t_iter: int = 15
    residual_stop_threshold: float = 1e-3
    fraction: FractionMethod = field(default_factory=FractionMethod)
    residual_floor: float = 1e-2
    pairing: str = "strongest"  # "feasible" or "segment"
    refine_passes: int = 0

    def __post_init__(self):
        if self.t_iter < 1:
            raise ConfigError("t_iter must be >= 1")
        if self.pairing not in ("strongest", "feasible", "segment"):
            raise ConfigError(f"unknown pairing {self.pairing!r}")


@dataclass
class EstimateReport:
    paths: list = field(default_factory=list)  # (gain, delay_norm, doppler_norm)
    residual_norms: list = field(default_factory=list)
    eval_count: int = 0
    iterations: int = 0
    flagged: list = field(default_factory=list)

    def channel_paths(self):
        return [ChannelPath(complex(h), float(l), float(k)) for h, l, k in self.paths]

    def to_dict(self):
        d = asdict(self)
        d["paths"] = [
            {"gain_re": float(np.real(h)), "gain_im": float(np.imag(h)), "delay_norm": float(l), "doppler_norm": float(k)}
            for h, l, k in self.paths
        ]
        d["flagged"] = [
            {"gain_re": float(np.real(h)), "gain_im": float(np.imag(h)), "delay_norm": float(l), "doppler_norm": float(k)}
            for h, l, k in self.flagged
        ]
        d["residual_norms"] = [float(r) for r in self.residual_norms]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        def tri(p):
            return (complex(p["gain_re"], p["gain_im"]), p["delay_norm"], p["doppler_norm"])

        return cls(
            paths=[tri(p) for p in d["paths"]],
            residual_norms=list(d["residual_norms"]),
            eval_count=int(d["eval_count"]),
            iterations=int(d["iterations"]),
            flagged=[tri(p) for p in d.get("flagged", [])],
        )


def _should_stop(opts: EstimatorOptions, before: float, after: float, initial: float) -> bool:
    if before == 0 or after <= opts.residual_floor * initial:
        return True
    if abs(after - before) / before <= opts.residual_stop_threshold:
        return True
    return False


def _chi_hat(y_t, n, method):
    upsilon = estimate_integer_shift(y_t)
    gamma, evals = estimate_fraction(y_t, upsilon, method, n)
    return upsilon + gamma, evals


def _local_shift(y_t, centre, n, method, halfwidth=1):
    """Shift estimate with the integer peak restricted to round(centre) +- halfwidth."""
    base = int(np.floor(centre + 0.5))
    keep = np.abs(y_t.offsets - base) <= halfwidth
    mag = np.where(keep, np.abs(y_t.y_t), -1.0)
    upsilon = int(y_t.offsets[np.argmax(mag)])
    gamma, evals = estimate_fraction(y_t, upsilon, method, n)
    return upsilon + gamma, evals


def _feasible_shift(y_t, chi, cfg, cfg_prime, limits, method):
    """Second-frame shift searched only where a path seen at ``chi`` in frame one can land."""
    s1, s2 = cfg.chirp_shift, cfg_prime.chirp_shift
    # (l, k) consistent with chi: k = chi + s1 l within the limits
    l_lo = max(0.0, (-limits.k_max - chi) / s1)
    l_hi = min(float(limits.l_max), (limits.k_max - chi) / s1)
    if l_lo > l_hi:
        l_lo = l_hi = min(max((-chi) / s1, 0.0), float(limits.l_max))
    ends = [chi + (s1 - s2) * l for l in (l_lo, l_hi)]
    lo, hi = min(ends), max(ends)
    cand = np.arange(int(np.floor(lo + 0.5)), int(np.floor(hi + 0.5)) + 1)
    offsets = y_t.offsets
    keep = np.isin(offsets, cand)
    if not keep.any():
        return _chi_hat(y_t, cfg_prime.n, method)
    mag = np.where(keep, np.abs(y_t.y_t), -1.0)
    upsilon = int(offsets[np.argmax(mag)])
    gamma, evals = estimate_fraction(y_t, upsilon, method, cfg_prime.n)
    return upsilon + gamma, evals


def _delay_segment(chi, s1, limits):
    """Delays l whose Doppler k = chi + s1 l stays within the limits."""
    l_lo = max(0.0, (-limits.k_max - chi) / s1)
    l_hi = min(float(limits.l_max), (limits.k_max - chi) / s1)
    if l_lo > l_hi:
        l_lo = l_hi = min(max(-chi / s1, 0.0), float(limits.l_max))
    return l_lo, l_hi


def _segment_shift(y_t, chi, cfg, cfg_prime, limits, method):
    """Second-frame shift searched along the segment of paths consistent with ``chi``.

    Every candidate is a physically valid (l, k), so the pair never needs clamping.
    """
    s1, s2 = cfg.chirp_shift, cfg_prime.chirp_shift
    l_lo, l_hi = _delay_segment(chi, s1, limits)
    offsets = y_t.offsets.astype(np.float64)
    count = 0

    def objective(l):
        nonlocal count
        count += 1
        t = dirichlet(offsets - (chi + (s1 - s2) * l), cfg_prime.n)
        corr = abs(np.vdot(t, y_t.y_t)) ** 2
        return corr / np.vdot(t, t).real if method.normalized else corr

    if l_hi - l_lo <= 0:
        l_best = l_lo
    elif method.kind == "grid":
        grid = l_lo + (l_hi - l_lo) * np.arange(method.rho + 1) / method.rho
        l_best = float(grid[np.argmax([objective(l) for l in grid])])
    else:
        l_best = gfs_optimize(objective, l_lo, l_hi, method.gfs).x
    return chi + (s1 - s2) * l_best, count


def mf_ce_fdfd(
    y_t: TruncatedObservation,
    y_t_prime: TruncatedObservation,
    cfg: WaveformConfig,
    cfg_prime: WaveformConfig,
    frame: PilotFrame,
    frame_prime: PilotFrame,
    opts: EstimatorOptions = EstimatorOptions(),
) -> EstimateReport:
    """Dual-frame matched-filter estimation for fractional delay and Doppler.

    Each iteration measures the strongest equivalent shift in both frames,
    resolves (l, k) from the pair, estimates the gain in both frames (the
    two estimates are averaged) and cancels the path from both residuals.
    """
    limits = frame.limits
    method = opts.fraction
    x_p, x_pp = frame.pilot_value, frame_prime.pilot_value
    c1, c1p, n = cfg.chirp_rate, cfg_prime.chirp_rate, cfg.n
    report = EstimateReport()
    r1, r2 = y_t, y_t_prime
    initial = np.hypot(np.linalg.norm(r1.y_t), np.linalg.norm(r2.y_t))
    report.residual_norms.append(float(np.linalg.norm(r1.y_t)))
    if initial == 0:
        return report
    before = initial
    found = []
    for _ in range(opts.t_iter):
        chi, e1 = _chi_hat(r1, n, method)
        if opts.pairing == "feasible":
            chi_p, e2 = _feasible_shift(r2, chi, cfg, cfg_prime, limits, method)
        elif opts.pairing == "segment":
            chi_p, e2 = _segment_shift(r2, chi, cfg, cfg_prime, limits, method)
        else:
            chi_p, e2 = _chi_hat(r2, n, method)
        report.eval_count += e1 + e2
        path = resolve_path(chi, chi_p, c1, c1p, n, limits)
        a1 = template_a(cfg, frame, path.delay, path.doppler)
        a2 = template_a(cfg_prime, frame_prime, path.delay, path.doppler)
        h = 0.5 * (estimate_gain(r1, a1, x_p) + estimate_gain(r2, a2, x_pp))
        r1 = cancel_path(r1, h, a1, x_p)
        r2 = cancel_path(r2, h, a2, x_pp)
        found.append([h, path, a1, a2])
        report.iterations += 1
        report.residual_norms.append(float(np.linalg.norm(r1.y_t)))
        after = np.hypot(np.linalg.norm(r1.y_t), np.linalg.norm(r2.y_t))
        if _should_stop(opts, before, after, initial):
            break
        before = after

    for _ in range(opts.refine_passes):
        for entry in found:
            h, path, a1, a2 = entry
            r1 = cancel_path(r1, -h, a1, x_p)
            r2 = cancel_path(r2, -h, a2, x_pp)
            centre = -cfg.chirp_shift * path.delay + path.doppler
            chi, e1 = _local_shift(r1, centre, n, method)
            pair = _segment_shift if opts.pairing == "segment" else _feasible_shift
            chi_p, e2 = pair(r2, chi, cfg, cfg_prime, limits, method)
            report.eval_count += e1 + e2
            path = resolve_path(chi, chi_p, c1, c1p, n, limits)
            a1 = template_a(cfg, frame, path.delay, path.doppler)
            a2 = template_a(cfg_prime, frame_prime, path.delay, path.doppler)
            h = 0.5 * (estimate_gain(r1, a1, x_p) + estimate_gain(r2, a2, x_pp))
            r1 = cancel_path(r1, h, a1, x_p)
            r2 = cancel_path(r2, h, a2, x_pp)
            entry[:] = [h, path, a1, a2]
        report.residual_norms.append(float(np.linalg.norm(r1.y_t)))

    for h, path, _, _ in found:
        report.paths.append((h, path.delay, path.doppler))
        if path.clamped:
            report.flagged.append((h, path.delay, path.doppler))
    return report


def mf_ce_idfd(
    y_t: TruncatedObservation,
    cfg: WaveformConfig,
    frame: PilotFrame,
    opts: EstimatorOptions = EstimatorOptions(),
) -> EstimateReport:
    """Single-frame estimation for integer delays with fractional Doppler.

    Paths whose decoded integer pair falls outside the limits are still
    cancelled but reported under ``flagged`` instead of ``paths``.
    """
    limits = frame.limits
    x_p = frame.pilot_value
    report = EstimateReport()
    r = y_t
    initial = float(np.linalg.norm(r.y_t))
    report.residual_norms.append(initial)
    if initial == 0:
        return report
    before = initial
    for _ in range(opts.t_iter):
        upsilon = estimate_integer_shift(r)
        l_bar, k_bar = decode_integer(upsilon, cfg)
        kappa, evals = estimate_fraction(r, upsilon, opts.fraction, cfg.n)
        report.eval_count += evals
        k = k_bar + kappa
        a = template_a(cfg, frame, float(l_bar), k)
        h = estimate_gain(r, a, x_p)
        r = cancel_path(r, h, a, x_p)
        if in_grid(l_bar, k_bar, limits):
            report.paths.append((h, float(l_bar), float(k)))
        else:
            report.flagged.append((h, float(l_bar), float(k)))
        report.iterations += 1
        after = float(np.linalg.norm(r.y_t))
        report.residual_norms.append(after)
        if _should_stop(opts, before, after, initial):
            break
        before = after
    return report


def baseline_threshold_ls(
    y_t: TruncatedObservation,
    cfg: WaveformConfig,
    frame: PilotFrame,
    threshold: float = 3.0,
    noise_variance: float = 0.0,
) -> EstimateReport:
    """Threshold detector: every window sample above threshold * noise_std is an integer path.

    The gain is the sample divided by the pilot and by the unit-modulus
    phase an integer path puts on its single tap.
    """
    y = y_t.y_t
    mag = np.abs(y)
    level = max(threshold * np.sqrt(noise_variance), 1e-6 * mag.max(initial=0.0))
    report = EstimateReport(residual_norms=[float(np.linalg.norm(y))])
    for off, v, m in zip(y_t.offsets, y, mag):
        if m <= level or m == 0:
            continue
        l_bar, k_bar = decode_integer(int(off), cfg)
        phase = alpha(cfg, frame.pilot_index + off, frame.pilot_index, k_bar, l_bar)
        h = complex(v / (frame.pilot_value * phase))
        if in_grid(l_bar, k_bar, frame.limits):
            report.paths.append((h, float(l_bar), k_bar))
        else:
            report.flagged.append((h, float(l_bar), k_bar))
    report.iterations = len(report.paths)
    report.eval_count = len(y)
    return report


def jmle_oracle(y_t, cfg: WaveformConfig, frame: PilotFrame, n_paths: int, delays, dopplers):
    """Brute-force joint ML over a coarse (l, k) grid with least-squares gains.

    Only meant for tiny instances (n_paths <= 2).
    """
    y = y_t.y_t if isinstance(y_t, TruncatedObservation) else np.asarray(y_t)
    grid = [(float(l), float(k)) for l in delays for k in dopplers]
    cols = {g: template_a(cfg, frame, *g) for g in grid}
    best = (np.inf, None, None)
    for combo in itertools.combinations(grid, n_paths):
        a = frame.pilot_value * np.stack([cols[g] for g in combo], axis=1)
        h, *_ = np.linalg.lstsq(a, y, rcond=None)
        cost = float(np.linalg.norm(y - a @ h) ** 2)
        if cost < best[0]:
            best = (cost, combo, h)
    cost, combo, h = best
    return [(complex(hi), l, k) for hi, (l, k) in zip(h, combo)], cost
