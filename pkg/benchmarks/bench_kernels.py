"""Compiled vs pure-Python congruence closure on A'(T) and a square subalgebra.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from tmdpsc import kernels
from tmdpsc.algebra_core import principal_congruence
from tmdpsc.chains import square_corpus
from tmdpsc.si_catalog import aprime_for


def all_pairs(alg):
    alg._principal.clear()
    for a in range(alg.size):
        for b in range(a + 1, alg.size):
            principal_congruence(alg, a, b)


def bench(alg, backend, repeat):
    kernels.use(backend)
    alg.translations()  # built once, not timed
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        all_pairs(alg)
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    A = aprime_for()
    algs = [A] + square_corpus(A, 3, cap=20)[-1:]
    backends = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])
    print(f"{'algebra':<40} {'size':>5} " + " ".join(f"{b:>10}" for b in backends))
    for alg in algs:
        times = [bench(alg, b, args.repeat) for b in backends]
        print(f"{alg.name[:40]:<40} {alg.size:>5} " + " ".join(f"{t:>9.4f}s" for t in times))


if __name__ == "__main__":
    main()
