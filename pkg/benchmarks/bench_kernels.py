"""Time the numba and numpy kernel backends on reference-size inputs.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from afdm_chanest import _kernels
from afdm_chanest.params import reference_setup


def cases(cfg):
    rng = np.random.default_rng(0)
    n, c1 = cfg.n, cfg.chirp_rate
    theta = rng.uniform(-n, n, 65 * 1000)
    gains = (rng.standard_normal(5) + 1j * rng.standard_normal(5)) / np.sqrt(10)
    delays = rng.uniform(0, 4, 5)
    dopplers = rng.uniform(-2, 2, 5)
    rows = np.arange(65, dtype=np.float64)
    return {
        "dirichlet (65k points)": lambda fns: fns[0](theta, n),
        "effective_channel (N=256, P=5)": lambda fns: fns[1](n, c1, 0.0, gains, delays, dopplers),
        "pilot_column (Q+1=65) x100": lambda fns: [fns[2](n, c1, 0.0, rows, 64.0, 2.25, 1.4) for _ in range(100)],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    _, cfg, _ = reference_setup()
    backends = _kernels.BACKENDS
    print(f"active backend: {_kernels.BACKEND}")
    print(f"{'kernel':34s} " + " ".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, fn in cases(cfg).items():
        times = {}
        for b, fns in backends.items():
            fn(fns)  # warm-up / jit compile
            times[b] = min(timeit.repeat(lambda: fn(fns), number=1, repeat=args.repeat))
        speed = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{name:34s} " + " ".join(f"{times[b] * 1e3:10.3f}ms" for b in backends) + f"  {speed:8.1f}x")


if __name__ == "__main__":
    main()
