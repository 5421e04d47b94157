"""Compiled vs pure-Python stage kernel.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times single HBVM steps on Kepler and a short adaptive run with each
available backend, and checks that both give the same numbers.
"""

import argparse
import math
import timeit

import numpy as np

from hbvm import kernels
from hbvm.integrator import AdaptiveConfig, integrate_adaptive
from hbvm.problems import kepler, quartic_oscillator
from hbvm.stepper import step
from hbvm.tableau import build_hbvm


def cases():
    kep = kepler(0.6)
    tab33, tab62, tab15 = build_hbvm(3, 3), build_hbvm(6, 2), build_hbvm(15, 3)
    yield "kepler e=0.6, HBVM(3,3) step", lambda b: step(tab33, kep, kep.y0, 0.05,
                                                             backend=b).y1
    yield "kepler e=0.6, HBVM(15,3) step", lambda b: step(tab15, kep, kep.y0, 0.05,
                                                              backend=b).y1
    quart = quartic_oscillator()
    yield "quartic, HBVM(6,2) step", lambda b: step(tab62, quart, quart.y0, 0.1,
                                                        backend=b).y1
    cfg = AdaptiveConfig(tol=1e-10, h_init=1e-3, h_max=math.pi / 2)
    yield "kepler e=0.6, HBVM(15,3) adaptive, 1 period", lambda b: integrate_adaptive(
        tab15, kep, kep.y0, 2 * math.pi, cfg, backend=b).y[-1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["python"] + (["compiled"] if kernels.HAVE_COMPILED else [])
    if not kernels.HAVE_COMPILED:
        print("compiled kernel not built; timing the python fallback only")
    print(f"{'case':48s}" + "".join(f"{b:>14s}" for b in backends) + "   speedup  max|diff|")
    for name, fn in cases():
        times, outs = [], []
        for b in backends:
            outs.append(fn(b))
            n = 1
            while timeit.timeit(lambda: fn(b), number=n) < 0.2:
                n *= 2
            times.append(min(timeit.repeat(lambda: fn(b), number=n, repeat=args.repeat)) / n)
        cols = "".join(f"{t * 1e6:12.1f}us" for t in times)
        speed = f"{times[0] / times[-1]:8.1f}x" if len(times) > 1 else "       -"
        diff = max(float(np.max(np.abs(o - outs[0]))) for o in outs)
        print(f"{name:48s}{cols}  {speed}  {diff:.1e}")


if __name__ == "__main__":
    main()
