"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--rows 20000] [--repeat 5]

Reports the best wall time per call for each kernel and backend, plus the
time of one full selection run with each backend.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fairsfs import kernels


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_g2(rows, repeat):
    rng = np.random.default_rng(0)
    x, y = rng.integers(0, 3, rows), rng.integers(0, 3, rows)
    z = rng.integers(0, 27, rows)
    out = {}
    for backend in available():
        out[backend] = _best(lambda: kernels.g2_from_codes(x, y, z, 3, 3, 27, backend=backend), repeat, 20)
    return out


def bench_knn(rows, repeat):
    rng = np.random.default_rng(1)
    train = rng.integers(0, 3, (rows // 4, 6))
    labels = rng.integers(0, 2, len(train))
    queries = rng.integers(0, 3, (200, 6))
    out = {}
    for backend in available():
        out[backend] = _best(lambda: kernels.knn_predict(train, labels, queries, 5, backend=backend), repeat, 1)
    return out


SELECT_SNIPPET = """
import time
from fairsfs.dataset import make_stream
from fairsfs.oracle import random_network, sample
from fairsfs.selection import run
bn = random_network(16, 0.25, seed=3)
t = sample(bn, {rows}, seed=3)
start = time.perf_counter()
run(t, make_stream(t))
print(time.perf_counter() - start)
"""


def bench_select(rows):
    out = {}
    for backend in available():
        env = dict(os.environ)
        env.pop("FAIRSFS_PURE_PYTHON", None)
        if backend == "python":
            env["FAIRSFS_PURE_PYTHON"] = "1"
        res = subprocess.run([sys.executable, "-c", SELECT_SNIPPET.format(rows=rows)],
                             env=env, capture_output=True, text=True, check=True)
        out[backend] = float(res.stdout.strip())
    return out


def available():
    names = ["python"]
    try:
        from fairsfs import _kernels  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=5)
    a = p.parse_args(argv)
    results = {
        f"g2_from_codes ({a.rows} rows, 27 strata)": bench_g2(a.rows, a.repeat),
        f"knn_predict ({a.rows // 4} train x 200 queries)": bench_knn(a.rows, a.repeat),
        f"selection run (16 nodes, {a.rows} rows)": bench_select(a.rows),
    }
    width = max(len(k) for k in results)
    print(f"{'kernel':<{width}}  {'python':>10}  {'cython':>10}  speedup")
    for name, times in results.items():
        py, cy = times.get("python"), times.get("cython")
        cy_s = f"{cy * 1e3:8.2f}ms" if cy else "       n/a"
        speed = f"{py / cy:6.1f}x" if cy else "    -"
        print(f"{name:<{width}}  {py * 1e3:8.2f}ms  {cy_s}  {speed}")


if __name__ == "__main__":
    main()
