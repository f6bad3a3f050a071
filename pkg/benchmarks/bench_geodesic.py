"""Times the shortest-path backends against each other on kNN graphs.

Usage: python3 benchmarks/bench_geodesic.py [--sizes 200,500,1000] [--k 10]
"""

import argparse
import time

import numpy as np

from geosim.geodesic import all_pairs_geodesic, geodesic_backend
from geosim.graphs import build_knn_graph


def best_of(graph, backend: str, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        all_pairs_geodesic(graph, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="200,500,1000", help="comma-separated point counts")
    ap.add_argument("--k", type=int, default=10, help="kNN graph degree")
    ap.add_argument("--dim", type=int, default=8, help="feature dimension of the random points")
    ap.add_argument("--repeats", type=int, default=1, help="keep the best of this many runs")
    args = ap.parse_args()

    backends = ["python"]
    if geodesic_backend() == "compiled":
        backends.insert(0, "compiled")
    else:
        print("note: compiled extension not built; timing the python backend only")

    rng = np.random.default_rng(0)
    print(f"{'n':>7}  " + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for n in (int(s) for s in args.sizes.split(",")):
        x = rng.normal(size=(n, args.dim))
        graph = build_knn_graph(x, k=args.k)
        times = [best_of(graph, b, args.repeats) for b in backends]
        row = f"{n:>7}  " + "".join(f"{t:>11.3f}s" for t in times)
        if len(times) == 2:
            row += f" {times[1] / times[0]:>10.1f}x"
        print(row)


if __name__ == "__main__":
    main()
