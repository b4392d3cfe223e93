"""Time the compiled layer kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--qubits 4 5 6] [--depth 10] [--repeat 5]

Reports the median wall time per call of ``apply_layers_overlap`` (state
objective) and ``apply_layers_trace`` (circuit objective), and the speedup.
"""

import argparse
import statistics
import timeit

import numpy as np

from rydqaoa import _pykernels
from rydqaoa.gates import ChainLayout, diagonal_table

try:
    from rydqaoa import _kernels
except ImportError:
    _kernels = None


def median_time(fn, number, repeat):
    runs = timeit.repeat(fn, number=number, repeat=repeat)
    return statistics.median(runs) / number


def bench(n, depth, repeat, rng):
    diag = diagonal_table(ChainLayout(n))
    angles = rng.uniform(-np.pi, np.pi, size=(depth, 5))
    dim = 2**n
    psi0 = np.full(dim, dim**-0.5, dtype=complex)
    tgt = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    tgt /= np.linalg.norm(tgt)
    u = np.ascontiguousarray(np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))[0])

    rows = []
    for name, args, calls in (("overlap", (psi0, tgt, angles, diag, n), 200),
                              ("trace", (u, angles, diag, n), 20)):
        py = getattr(_pykernels, "apply_layers_" + name)
        t_py = median_time(lambda: py(*args), calls, repeat)
        if _kernels is not None:
            cy = getattr(_kernels, "apply_layers_" + name)
            assert abs(cy(*args) - py(*args)) < 1e-10
            t_cy = median_time(lambda: cy(*args), calls, repeat)
        else:
            t_cy = float("nan")
        rows.append((name, n, depth, t_py, t_cy))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, nargs="+", default=[4, 5, 6])
    ap.add_argument("--depth", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernel not built; only the fallback is timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':8} {'n':>2} {'p':>3} {'numpy (us)':>12} {'cython (us)':>12} {'speedup':>8}")
    for n in args.qubits:
        for name, nq, p, t_py, t_cy in bench(n, args.depth, args.repeat, rng):
            print(f"{name:8} {nq:2d} {p:3d} {t_py * 1e6:12.1f} {t_cy * 1e6:12.1f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
