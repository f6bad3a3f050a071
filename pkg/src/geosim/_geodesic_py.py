"""Per-source shortest paths over a CSR adjacency, stdlib-heap backend."""

from __future__ import annotations

import heapq
import math

import numpy as np


def dijkstra_all_sources(indptr, indices, weights, hop_limit: int = -1) -> np.ndarray:
    """Dense matrix of shortest-path lengths; unreachable pairs stay +inf.

    hop_limit < 0 means unlimited. Otherwise nodes settled hop_limit edges from
    the source are not expanded, truncating the search (an approximation: hop
    counts are taken from whichever path last improved a node's distance).
    """
    n = len(indptr) - 1
    ipt = [int(v) for v in indptr]
    idx = [int(v) for v in indices]
    wts = [float(v) for v in weights]
    limit = int(hop_limit)
    out = np.full((n, n), math.inf, dtype=np.float64)
    for s in range(n):
        dist = [math.inf] * n
        hops = [0] * n
        done = [False] * n
        dist[s] = 0.0
        heap = [(0.0, s)]
        while heap:
            du, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if 0 <= limit <= hops[u]:
                continue
            for e in range(ipt[u], ipt[u + 1]):
                v = idx[e]
                nd = du + wts[e]
                if nd < dist[v]:
                    dist[v] = nd
                    hops[v] = hops[u] + 1
                    heapq.heappush(heap, (nd, v))
        out[s] = dist
    return out
