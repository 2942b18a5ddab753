"""Time vertex-table construction with the numba and numpy kernels.

    python3 benchmarks/bench_kernels.py [--edges 18] [--repeat 3]
"""
import argparse
import random
import time

import numpy as np

from qigtree import _kernels
from qigtree.polytope import GluingTree
from qigtree.verify import random_tree


def workload(n_edges: int, seed: int):
    rng = random.Random(seed)
    t = random_tree(rng, n_edges + 1)
    gt = GluingTree(t, [v for v in t.leaves() if rng.random() < 0.5])
    coords = gt.coords()
    edge_index = {e: i for i, e in enumerate(t.sorted_edges())}
    width = max(len(s) for s in coords.subsets)
    ce = np.full((len(coords), width), -1, dtype=np.int64)
    cb = np.zeros_like(ce)
    # synthetic edge requirements: every member of the subset points at its center
    for s_idx, (s, c) in enumerate(zip(coords.subsets, coords.centers)):
        w = 0
        for v in s:
            e = tuple(sorted((v, c)))
            if e in edge_index:
                ce[s_idx, w] = edge_index[e]
                cb[s_idx, w] = int(e[0] == v)
                w += 1
    masks = np.arange(2**n_edges, dtype=np.int64)
    return masks, ce, cb


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--edges", type=int, default=18)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    masks, ce, cb = workload(args.edges, args.seed)
    print(f"{len(masks)} orientations x {len(ce)} coordinates")
    t_np = best_of(lambda: _kernels.imsets_from_masks_numpy(masks, ce, cb), args.repeat)
    print(f"numpy  {t_np:.4f} s")
    if _kernels.HAVE_NUMBA:
        _kernels.imsets_from_masks(masks[:2], ce, cb)  # compile
        t_nb = best_of(lambda: _kernels.imsets_from_masks(masks, ce, cb), args.repeat)
        print(f"numba  {t_nb:.4f} s  ({t_np / t_nb:.1f}x)")
    else:
        print("numba unavailable")


if __name__ == "__main__":
    main()
