"""Monte Carlo runner: NMSE / BER sweeps, orthogonality sweeps, config and CSV/JSON output."""

from __future__ import annotations

import configparser
import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import channel, pilot
from .equalize import equalize, qam_demap
from .estimate import (
    EstimatorOptions,
    FractionMethod,
    GfsParams,
    baseline_threshold_ls,
    mf_ce_fdfd,
    mf_ce_idfd,
)
from .params import (
    REFERENCE,
    ChannelSpec,
    ConfigError,
    WaveformConfig,
    derive_limits,
    draw_channel,
)

log = logging.getLogger(__name__)

SCHEMES = ("mf_grid", "mf_gfs", "ls_baseline", "perfect_csi")
RESULT_COLUMNS = ("scheme", "regime", "snr_db", "nmse", "ber", "eval_count_mean", "trials", "seed", "nmse_std_err")


@dataclass(frozen=True)
class ExperimentConfig:
    n_subcarriers: int = REFERENCE["n_subcarriers"]
    subcarrier_spacing: float = REFERENCE["subcarrier_spacing_hz"]
    xi: int = REFERENCE["xi"]
    xi_prime: int = REFERENCE["xi_prime"]
    c2: float = REFERENCE["c2"]
    tau_max: float = REFERENCE["tau_max_s"]
    nu_max: float = REFERENCE["nu_max_hz"]
    num_paths: int = REFERENCE["num_paths"]
    snr_db_list: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 200
    schemes: tuple = ("mf_gfs",)
    regime: str = "fdfd"
    rho: int = 20
    gfs_a: float = 1.0
    gfs_b: float = 1.0
    gfs_p: int = 1
    gfs_q: int = 1
    n_g: int = 15
    epsilon: float = 1e-4
    t_iter: int = 15
    residual_stop_threshold: float = 1e-3
    residual_floor: float = 1e-2
    pairing: str = "segment"
    refine_passes: int = 0
    ls_threshold: float = 3.0
    pilot_power_db: float = 30.0
    seed: int = 42
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        schemes = (self.schemes,) if isinstance(self.schemes, str) else tuple(self.schemes)
        object.__setattr__(self, "schemes", schemes)
        object.__setattr__(self, "regime", self.regime.lower())
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_db_list:
            raise ConfigError("snr_db_list is empty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}; choose from {SCHEMES}")
        if self.regime not in ("idd", "idfd", "fdfd"):
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.regime == "fdfd" and self.xi == self.xi_prime:
            raise ConfigError("fdfd needs xi != xi_prime")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def gfs(self) -> GfsParams:
        return GfsParams(self.gfs_a, self.gfs_b, self.gfs_p, self.gfs_q, self.n_g, self.epsilon)

    def channel_spec(self) -> ChannelSpec:
        return ChannelSpec(self.tau_max, self.nu_max, self.num_paths)

    def waveforms(self):
        """(cfg, limits, cfg', limits') with the second pair only for fdfd."""
        spec = self.channel_spec()
        limits, cfg = derive_limits(spec, WaveformConfig(self.n_subcarriers, self.subcarrier_spacing, self.xi, self.c2), pilot=True)
        if self.regime != "fdfd":
            return cfg, limits, None, None
        limits2, cfg2 = derive_limits(
            spec, WaveformConfig(self.n_subcarriers, self.subcarrier_spacing, self.xi_prime, self.c2), pilot=True
        )
        return cfg, limits, cfg2, limits2

    def estimator_options(self, scheme: str) -> EstimatorOptions:
        kind = "grid" if scheme == "mf_grid" else "gfs"
        return EstimatorOptions(
            t_iter=self.t_iter,
            residual_stop_threshold=self.residual_stop_threshold,
            fraction=FractionMethod(kind=kind, rho=self.rho, gfs=self.gfs),
            residual_floor=self.residual_floor,
            pairing=self.pairing,
            refine_passes=self.refine_passes,
        )

    def to_dict(self):
        d = asdict(self)
        d["snr_db_list"] = list(self.snr_db_list)
        d["schemes"] = list(self.schemes)
        return d


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    regime: str
    snr_db: float
    nmse: float
    ber: float
    eval_count_mean: float
    trials: int
    seed: int
    nmse_std_err: float = 0.0

    def __post_init__(self):
        if not self.nmse >= 0:
            raise ValueError("nmse must be nonnegative")
        if not 0 <= self.ber <= 1:
            raise ValueError("ber must lie in [0, 1]")


@dataclass(frozen=True)
class TrialResult:
    nmse: float
    bit_errors: int
    bits: int
    eval_count: int
    paths: list = field(default_factory=list)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0


def noise_variance_for(snr_db: float, data_power: float = 1.0) -> float:
    return data_power / 10 ** (snr_db / 10)


@dataclass(frozen=True)
class TrialSeed:
    """Channel/payload stream and noise stream for one trial."""

    draw: np.random.SeedSequence
    noise: np.random.SeedSequence


def trial_seed(master: int, snr_index: int, trial: int) -> TrialSeed:
    """Channel and payload depend on the trial only, noise also on the SNR point.

    Every scheme and SNR point sees the same channel for a given trial, so
    differences along the sweep come from noise alone.
    """
    return TrialSeed(
        draw=np.random.SeedSequence(master, spawn_key=(0, trial)),
        noise=np.random.SeedSequence(master, spawn_key=(1, snr_index, trial)),
    )


def nmse(h_true, h_est) -> float:
    h_true = np.asarray(h_true)
    den = np.linalg.norm(h_true) ** 2
    return float(np.linalg.norm(h_true - np.asarray(h_est)) ** 2 / den) if den > 0 else 0.0


def _observe(cfg, frame, paths, noise_variance, rng):
    return channel.transmit(cfg, frame.x, paths, noise_variance, rng)


def detect_bits(h_est, y, frame: pilot.PilotFrame, noise_variance: float) -> np.ndarray:
    """LMMSE on the data positions after removing the known pilot contribution."""
    y = np.asarray(y) - h_est[:, frame.pilot_index] * frame.pilot_value
    x_hat = equalize(h_est[:, frame.data_index], y, noise_variance)
    return qam_demap(x_hat)


def run_trial(config: ExperimentConfig, scheme: str, snr_db: float, seed, waveforms=None) -> TrialResult:
    """One channel draw, estimation, reconstruction and detection."""
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    cfg, limits, cfg2, limits2 = waveforms or config.waveforms()
    if not isinstance(seed, TrialSeed):
        seed = trial_seed(int(seed), 0, 0)
    chan_ss, frame_ss = seed.draw.spawn(2)
    noise_ss = seed.noise
    rng_noise = np.random.default_rng(noise_ss)
    sigma2 = noise_variance_for(snr_db)
    paths = draw_channel(config.channel_spec(), cfg, limits, np.random.default_rng(chan_ss), config.regime)
    fdfd = config.regime == "fdfd"
    if fdfd:
        f1, f2 = pilot.build_dual_frames(cfg, cfg2, limits, limits2, config.pilot_power_db, np.random.default_rng(frame_ss))
    else:
        f1 = pilot.build_pilot_frame(cfg, limits, config.pilot_power_db, np.random.default_rng(frame_ss))
    y1 = _observe(cfg, f1, paths, sigma2, rng_noise)
    y2 = _observe(cfg2, f2, paths, sigma2, rng_noise) if fdfd else None

    evals = 0
    if scheme == "perfect_csi":
        est_paths = paths
    elif scheme == "ls_baseline":
        rep = baseline_threshold_ls(pilot.truncate(cfg, y1, f1), cfg, f1, config.ls_threshold, sigma2)
        est_paths, evals = rep.channel_paths(), rep.eval_count
    else:
        opts = config.estimator_options(scheme)
        if fdfd:
            rep = mf_ce_fdfd(pilot.truncate(cfg, y1, f1), pilot.truncate(cfg2, y2, f2), cfg, cfg2, f1, f2, opts)
        else:
            rep = mf_ce_idfd(pilot.truncate(cfg, y1, f1), cfg, f1, opts)
        est_paths, evals = rep.channel_paths(), rep.eval_count

    h_true = channel.build_effective_channel(cfg, paths).h_eff
    h_est = h_true if scheme == "perfect_csi" else channel.build_effective_channel(cfg, est_paths).h_eff
    bits_hat = detect_bits(h_est, y1, f1, sigma2)
    errors = int(np.count_nonzero(bits_hat != f1.bits))
    return TrialResult(nmse(h_true, h_est), errors, int(f1.bits.size), int(evals), list(est_paths))


def _aggregate(config, scheme, snr_db, results) -> ResultRow:
    errs = np.array([r.nmse for r in results])
    se = float(errs.std(ddof=1) / np.sqrt(len(errs))) if len(errs) > 1 else 0.0
    bits = sum(r.bits for r in results)
    return ResultRow(
        scheme=scheme,
        regime=config.regime,
        snr_db=float(snr_db),
        nmse=float(errs.mean()),
        ber=sum(r.bit_errors for r in results) / bits if bits else 0.0,
        eval_count_mean=float(np.mean([r.eval_count for r in results])),
        trials=len(results),
        seed=config.seed,
        nmse_std_err=se,
    )


def run_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """One row per (scheme, SNR); trials fan out over ``config.workers`` threads.

    Seeds depend only on (master seed, SNR index, trial index), so results do
    not depend on the worker count or completion order.
    """
    waveforms = config.waveforms()
    jobs = [
        (scheme, i, snr, t)
        for scheme in config.schemes
        for i, snr in enumerate(config.snr_db_list)
        for t in range(config.trials)
    ]

    def work(job):
        scheme, i, snr, t = job
        return run_trial(config, scheme, snr, trial_seed(config.seed, i, t), waveforms)

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    rows = []
    per_point = config.trials
    for start in range(0, len(jobs), per_point):
        scheme, _, snr, _ = jobs[start]
        rows.append(_aggregate(config, scheme, snr, results[start : start + per_point]))
        log.info("%s snr=%g nmse=%.3e ber=%.3e", scheme, snr, rows[-1].nmse, rows[-1].ber)
    if config.output:
        write_results(rows, config.output, config)
    return rows


# ----------------------------------------------------------------- orthogonality


def draw_distinct_integer_delays(spec: ChannelSpec, cfg: WaveformConfig, limits, rng, max_tries: int = 10000):
    """Fractional paths whose integer delay parts (nearest split) are pairwise distinct.

    Rejection sampling; raises when ``max_tries`` draws all collide.
    """
    for _ in range(max_tries):
        paths = draw_channel(spec, cfg, limits, rng, "fdfd")
        parts = [p.delay_parts[0] for p in paths]
        if len(set(parts)) == len(parts):
            return paths
    raise ConfigError("could not draw paths with distinct integer delays; lower num_paths")


@dataclass(frozen=True)
class OrthogonalityConfig:
    xi_list: tuple = tuple(range(1, 9))
    n_fixed: int = 256
    n_list: tuple = tuple(200 * i for i in range(1, 9))
    xi_fixed: int = 4
    channels: int = 100
    num_paths: int = 3
    subcarrier_spacing: float = REFERENCE["subcarrier_spacing_hz"]
    tau_max: float = REFERENCE["tau_max_s"]
    nu_max: float = REFERENCE["nu_max_hz"]
    seed: int = 7
    output: str | None = None


def _nmse_a_point(ocfg: OrthogonalityConfig, n: int, xi: int, stream: int):
    spec = ChannelSpec(ocfg.tau_max, ocfg.nu_max, ocfg.num_paths)
    limits, cfg = derive_limits(spec, WaveformConfig(n, ocfg.subcarrier_spacing, xi))
    # channel j starts from the same stream at every point of a sweep
    values = []
    for j in range(ocfg.channels):
        rng = np.random.default_rng(np.random.SeedSequence(ocfg.seed, spawn_key=(stream, j)))
        values.append(pilot.nmse_a(cfg, limits, draw_distinct_integer_delays(spec, cfg, limits, rng)))
    return float(np.median(values)), float(np.mean(values))


def nmse_a_sweep(ocfg: OrthogonalityConfig = OrthogonalityConfig()):
    """Rows (sweep, n, xi, median, mean) over xi at fixed N and over N at fixed xi."""
    rows = []
    for xi in ocfg.xi_list:
        med, mean = _nmse_a_point(ocfg, ocfg.n_fixed, xi, 0)
        rows.append({"sweep": "xi", "n": ocfg.n_fixed, "xi": xi, "nmse_a_median": med, "nmse_a_mean": mean})
    for n in ocfg.n_list:
        med, mean = _nmse_a_point(ocfg, n, ocfg.xi_fixed, 1)
        rows.append({"sweep": "n", "n": n, "xi": ocfg.xi_fixed, "nmse_a_median": med, "nmse_a_mean": mean})
    if ocfg.output:
        write_dict_rows(rows, ocfg.output, sidecar=asdict(ocfg))
    return rows


# -------------------------------------------------------------------------- I/O


# file keys that follow the reference parameter table's names
CONFIG_ALIASES = {
    "subcarrier_spacing_hz": "subcarrier_spacing",
    "tau_max_s": "tau_max",
    "nu_max_hz": "nu_max",
    "scheme": "schemes",
    "channel_regime": "regime",
    "snr_db": "snr_db_list",
}


def _coerce(cls, raw: dict):
    known = {f.name: f for f in fields(cls)}
    out = {}
    for key, value in raw.items():
        key = CONFIG_ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        default = known[key].default
        if isinstance(value, str):
            value = _parse_scalar(value, default)
        out[key] = value
    return out


def _parse_scalar(text: str, default):
    text = text.strip()
    if isinstance(default, tuple):
        if ":" in text:
            return tuple(parse_range(text))
        return tuple(_parse_scalar(t, default[0] if default else "") for t in text.split(",") if t.strip())
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def parse_range(text: str) -> list[float]:
    """``start:step:stop`` inclusive, or a comma list."""
    if ":" in text:
        start, step, stop = (float(t) for t in text.split(":"))
        if step <= 0:
            raise ConfigError("range step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    return [float(t) for t in text.split(",") if t.strip()]


def load_config(path) -> ExperimentConfig:
    """JSON object or flat ``key = value`` lines."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        parser.read_string("[experiment]\n" + text)
        raw = dict(parser["experiment"])
    return ExperimentConfig(**_coerce(ExperimentConfig, raw))


def write_results(rows, path, config: ExperimentConfig | None = None) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RESULT_COLUMNS)
            for r in rows:
                writer.writerow([_fmt(getattr(r, c)) for c in RESULT_COLUMNS])
        if config is not None:
            path.with_suffix(path.suffix + ".json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing results to {path}: {exc}") from exc


def write_dict_rows(rows, path, sidecar=None) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            for r in rows:
                writer.writerow({k: _fmt(v) for k, v in r.items()})
        if sidecar is not None:
            path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True, default=list) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})

