"""Compiled vs pure-Python kernels on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each workload runs on both backends; outputs are compared before timing.
"""
import argparse
import time

import numpy as np

from rigidkit import _kernels
from rigidkit.realize import build_construction
from rigidkit.rigidity import PRIME, _packed
from rigidkit.hypergraph import PinnedInstance

BACKENDS = {"python": _kernels.py, "cython": _kernels.compiled}


def pebble_workload(seed=0, n=300, k=2):
    rng = np.random.default_rng(seed)
    edges = [tuple(rng.choice(n, int(rng.integers(1, 3)), replace=False)) for _ in range(k * n + 50)]

    def run(impl):
        game = impl.PebbleGame(n, k)
        return [game.add_edge(e) for e in edges]

    return run


def rank_workload(seed=0, size=120):
    rng = np.random.default_rng(seed)
    M = rng.integers(0, PRIME, size=(size, size), dtype=np.uint64)
    M[:, -10:] = M[:, :10]  # rank deficient on purpose

    def run(impl):
        return impl.rank_mod_p(M, PRIME)

    return run


def minors_workload(seed=0, m=2000):
    h, _ = build_construction(3, 2, m)
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(h.n, 2))
    inst = PinnedInstance(h, tuple(rng.normal(size=(1, 2)) for _ in h.edges))
    e_ptr, e_idx, X, x_ptr = _packed(inst)
    col = np.arange(h.n, dtype=np.int64)

    def run(impl):
        return impl.incidence_minors(P, e_ptr, e_idx, X, x_ptr, 3, col, h.n * 2, True)

    return run


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.allclose(a, b, rtol=1e-12, atol=1e-12)
    return a == b


def best_time(fn, impl, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn(impl)
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if BACKENDS["cython"] is None:
        print("compiled kernels not built; nothing to compare")
        return 1
    workloads = [
        ("pebble game, n=300, k=2", pebble_workload()),
        ("rank mod p, 120x120", rank_workload()),
        ("incidence minors + Jacobian, m=2000", minors_workload()),
    ]
    print(f"{'workload':40s} {'python':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, fn in workloads:
        if not same(fn(BACKENDS["python"]), fn(BACKENDS["cython"])):
            print(f"{name}: backends disagree")
            return 1
        tp = best_time(fn, BACKENDS["python"], args.repeat)
        tc = best_time(fn, BACKENDS["cython"], args.repeat)
        print(f"{name:40s} {tp * 1e3:9.2f}ms {tc * 1e3:9.2f}ms {tp / tc:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
