"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the workload it sees in a default run: the phase
sums for the full 141 x 501 grid at the converged node count, and event
binning for a few million jittered coincidences.  A final row times the
whole amplitude assembly with each backend in a fresh interpreter.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from biphoton import _kernels_py

try:
    from biphoton import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _phase_workload(nodes=1024):
    rng = np.random.default_rng(0)
    dk = rng.uniform(-3e4, 3e4, 141 * 501)
    x, w = np.polynomial.legendre.leggauss(nodes)
    z = 1.05e-3 * x
    return dk, z, 1.05e-3 * w * np.exp(-(z / 0.24e-3) ** 2)


def _event_workload(n=4_000_000):
    rng = np.random.default_rng(1)
    return rng.normal(12.5, 5.0, n), rng.normal(12.5, 5.0, n)


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def _assembly_time(pure: bool) -> float:
    env = dict(os.environ, BIPHOTON_PURE_PYTHON="1" if pure else "0")
    code = ("import time; from biphoton import SourceModel, SpectralGrid, assemble_jsa;"
            "t=time.perf_counter(); assemble_jsa(SourceModel(), SpectralGrid.reference_window());"
            "print(time.perf_counter()-t)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    dk, z, wenv = _phase_workload()
    pos1, pos2 = _event_workload()
    rows = []

    def counts():
        return np.zeros((25, 25), dtype=np.int64)

    py_phase = _best(lambda: _kernels_py.phase_sums(dk, z, wenv), args.repeat)
    py_bin = _best(lambda: _kernels_py.bin_events(pos1, pos2, counts()), args.repeat)
    if _kernels_c is not None:
        c_phase = _best(lambda: _kernels_c.phase_sums(dk, z, wenv, 0), args.repeat)
        c_bin = _best(lambda: _kernels_c.bin_events(pos1, pos2, counts()), args.repeat)
    else:
        c_phase = c_bin = float("nan")
    rows.append(("phase_sums (70641 x 1024)", py_phase, c_phase))
    rows.append(("bin_events (4e6 events)", py_bin, c_bin))
    rows.append(("assemble_jsa 141x501", _assembly_time(True),
                 _assembly_time(False) if _kernels_c is not None else float("nan")))

    print(f"{'kernel':<28}{'numpy [s]':>12}{'compiled [s]':>14}{'speed-up':>10}")
    for name, py, c in rows:
        print(f"{name:<28}{py:>12.4f}{c:>14.4f}{py / c:>10.1f}")
    if _kernels_c is None:
        print("compiled extension not built; only the numpy column is meaningful")


if __name__ == "__main__":
    main()
