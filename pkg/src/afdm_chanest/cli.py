"""Command line entry point: ``afdm-chanest sweep|surface|orthogonality``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import harness
from .iorel import sinr_loss_surface
from .params import REFERENCE, ChannelSpec, ConfigError, WaveformConfig, derive_limits

LOG_ENV = "AFDM_CHANEST_LOG_LEVEL"


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _cmd_sweep(args):
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    overrides = {
        "schemes": tuple(s for part in args.scheme for s in part.split(",")) if args.scheme else None,
        "regime": args.regime,
        "snr_db_list": tuple(harness.parse_range(args.snr)) if args.snr is not None else None,
        "trials": args.trials,
        "seed": args.seed,
        "workers": args.workers,
        "output": args.out,
    }
    cfg = harness.with_overrides(cfg, **overrides)
    rows = harness.run_sweep(cfg)
    if not cfg.output:
        for r in rows:
            print(f"{r.scheme},{r.regime},{r.snr_db:g},{r.nmse:.6e},{r.ber:.6e},{r.eval_count_mean:.1f},{r.trials}")
    return 0


def _cmd_surface(args):
    if not args.sinr_loss:
        raise ConfigError("surface: only --sinr-loss is available")
    spec = ChannelSpec(REFERENCE["tau_max_s"], REFERENCE["nu_max_hz"])
    _, cfg = derive_limits(spec, WaveformConfig(args.n, REFERENCE["subcarrier_spacing_hz"], args.xi))
    iota, kappa, loss = sinr_loss_surface(cfg, args.points)
    rows = [{"iota": float(i), "kappa": float(k), "sinr_loss_db": float(v)} for i, k, v in zip(iota, kappa, loss)]
    harness.write_dict_rows(rows, args.out, sidecar={"n": args.n, "xi": args.xi, "points": args.points})
    print(f"max loss {-loss.min():.3f} dB over {len(rows)} points -> {args.out}")
    return 0


def _cmd_orthogonality(args):
    ocfg = harness.OrthogonalityConfig(channels=args.channels, num_paths=args.paths, seed=args.seed, output=args.out)
    rows = harness.nmse_a_sweep(ocfg)
    if not args.out:
        for r in rows:
            print(f"{r['sweep']},{r['n']},{r['xi']},{r['nmse_a_median']:.6e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afdm-chanest", description="AFDM channel estimation experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="NMSE/BER Monte Carlo sweep over SNR")
    p.add_argument("--config", help="JSON or key=value experiment file")
    p.add_argument("--scheme", action="append", help="mf_grid, mf_gfs, ls_baseline, perfect_csi (repeat or comma-separate)")
    p.add_argument("--regime", choices=["idd", "idfd", "fdfd"])
    p.add_argument("--snr", help="start:step:stop in dB, or a comma list")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="CSV path; a .json sidecar with the config is written next to it")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("surface", help="SINR-loss surface over fractional delay/Doppler")
    p.add_argument("--sinr-loss", action="store_true")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--xi", type=int, default=4)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_surface)

    p = sub.add_parser("orthogonality", help="NMSE_A of the truncated template matrix vs xi and N")
    p.add_argument("--channels", type=int, default=100)
    p.add_argument("--paths", type=int, default=3)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_orthogonality)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"afdm-chanest: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
