"""Compare the compiled and numpy moment kernels.

    python benchmarks/bench_kernels.py [--repeat N] [--filter-steps K]

Prints per-call times for each kernel at a few concentrations, the largest
disagreement between the backends, and the wall time of a short filter run
under each backend (run in a subprocess so the import-time selection applies).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mfattitude import _kernels_py

try:
    from mfattitude import _kernels
except ImportError:
    _kernels = None

POINTS = [(0.5, 0.2, -0.1), (5.0, 2.0, 1.0), (114.0, 107.0, -103.0), (300.0, 250.0, 200.0),
          (2000.0, 1900.0, 1800.0)]

FILTER_SNIPPET = """
import time
from mfattitude import BACKEND
from mfattitude.scenario import preset
from mfattitude.sim import simulate_measurements, _run_be
from mfattitude.matrix_fisher import FitDiagnostics
cfg = preset("II")
stream = simulate_measurements(cfg, 0)
stream.gyro = stream.gyro[:{steps}]
t0 = time.perf_counter()
_run_be(cfg, stream, FitDiagnostics(), False)
print(BACKEND, time.perf_counter() - t0)
"""


def per_call(fn, repeat):
    return min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat


def kernel_table(repeat):
    backends = [("python", _kernels_py)] + ([("compiled", _kernels)] if _kernels else [])
    print(f"{'kernel':<14}{'s':<26}" + "".join(f"{n:>12}" for n, _ in backends) + "   (us/call)")
    worst = 0.0
    for s in POINTS:
        d = _kernels_py.moments(*s)[1:]
        warm = tuple(0.98 * x for x in s)
        cases = {
            "log_c": lambda k: k.log_c(*s),
            "moments": lambda k: k.moments(*s),
            "moments_hess": lambda k: k.moments_hess(*s),
            "fit_s cold": lambda k: k.fit_s(*d),
            "fit_s warm": lambda k: k.fit_s(*d, *warm, True),
        }
        for name, call in cases.items():
            times = [per_call(lambda k=k: call(k), repeat) * 1e6 for _, k in backends]
            print(f"{name:<14}{str(s):<26}" + "".join(f"{t:>12.1f}" for t in times))
        if _kernels:
            a = _kernels_py.moments_hess(*s)
            b = _kernels.moments_hess(*s)
            worst = max(worst, abs(a[0] - b[0]) / max(1.0, abs(a[0])),
                        float(np.max(np.abs(a[1] - b[1]))))
    if _kernels:
        print(f"max backend disagreement (log c rel., d abs.): {worst:.2e}")


def filter_run(steps):
    for env in ({}, {"MFATTITUDE_PUREPY": "1"}):
        out = subprocess.run([sys.executable, "-c", FILTER_SNIPPET.format(steps=steps)],
                             env={**os.environ, **env}, capture_output=True, text=True,
                             check=True)
        name, secs = out.stdout.split()
        print(f"filter run, {steps} steps, backend {name:<9}: {float(secs):.3f} s")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=200)
    p.add_argument("--filter-steps", type=int, default=500)
    args = p.parse_args()
    kernel_table(args.repeat)
    filter_run(args.filter_steps)


if __name__ == "__main__":
    main()
