"""Compare the compiled and pure-Python spanning kernels.

Usage: python3 benchmarks/bench_spanning.py [--trials N] [--sizes 12x24,24x48]
"""

import argparse
import time

import numpy as np

from akltmqc import _spanning_py
from akltmqc.lattice import build_lattice

try:
    from akltmqc import _spanning as _compiled
except ImportError:
    _compiled = None


def _inputs(rows, cols, p, trials, seed):
    lat = build_lattice(rows, cols)
    bonds = lat.bonds()
    bond_a = np.array([lat.site_index(b.a) for b in bonds], dtype=np.int32)
    bond_b = np.array([lat.site_index(b.b) for b in bonds], dtype=np.int32)
    left = np.arange(0, rows * cols, cols, dtype=np.int32)
    right = left + np.int32(cols - 1)
    occ = (
        np.random.default_rng(seed).random((trials, len(bonds))) < p
    ).astype(np.uint8)
    return lat.n_sites, bond_a, bond_b, occ, left, right


def _time(mod, args, repeats=3):
    best, hits = float("inf"), None
    for _ in range(repeats):
        t0 = time.perf_counter()
        hits = mod.count_spans(*args)
        best = min(best, time.perf_counter() - t0)
    return best, hits


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--sizes", default="12x24,24x48")
    ap.add_argument("--p", type=float, default=2.0 / 3.0)
    ap.add_argument("--seed", type=int, default=0)
    ns = ap.parse_args()

    print(f"{'size':>8} {'trials':>7} {'pure (s)':>10} "
          f"{'compiled (s)':>13} {'speedup':>8}")
    for token in ns.sizes.split(","):
        rows, cols = (int(t) for t in token.split("x"))
        args = _inputs(rows, cols, ns.p, ns.trials, ns.seed)
        t_py, hits_py = _time(_spanning_py, args)
        if _compiled is None:
            print(f"{token:>8} {ns.trials:>7} {t_py:>10.4f} "
                  f"{'(not built)':>13} {'-':>8}")
            continue
        t_c, hits_c = _time(_compiled, args)
        assert hits_py == hits_c, "backends disagree"
        print(f"{token:>8} {ns.trials:>7} {t_py:>10.4f} {t_c:>13.4f} "
              f"{t_py / t_c:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
