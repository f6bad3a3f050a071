"""Per-source shortest paths over a CSR adjacency, compiled backend.

Semantics mirror _geodesic_py.dijkstra_all_sources exactly: binary-heap
Dijkstra with lazy deletion, optional hop-limited truncation.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def dijkstra_all_sources(indptr, indices, weights, long hop_limit=-1):
    """Dense matrix of shortest-path lengths; unreachable pairs stay +inf."""
    cdef cnp.int64_t[::1] ipt = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] wts = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = ipt.shape[0] - 1
    cdef Py_ssize_t m = idx.shape[0]

    out_np = np.full((n, n), np.inf, dtype=np.float64)
    cdef double[:, ::1] out = out_np

    # Lazy-deletion heap: every relaxation may push once, so m + 1 slots suffice.
    cdef double[::1] heap_d = np.empty(m + 1, dtype=np.float64)
    cdef cnp.int64_t[::1] heap_v = np.empty(m + 1, dtype=np.int64)
    cdef double[::1] dist = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] hops = np.zeros(n, dtype=np.int64)
    cdef cnp.uint8_t[::1] done = np.zeros(n, dtype=np.uint8)

    cdef Py_ssize_t s, u, v, e, i, child, parent, size
    cdef double du, nd, inf = np.inf

    for s in range(n):
        for i in range(n):
            dist[i] = inf
            done[i] = 0
            hops[i] = 0
        dist[s] = 0.0
        heap_d[0] = 0.0
        heap_v[0] = s
        size = 1
        while size > 0:
            du = heap_d[0]
            u = heap_v[0]
            # pop: move the last leaf to the root and sift down
            size -= 1
            if size > 0:
                nd = heap_d[size]
                v = heap_v[size]
                i = 0
                while True:
                    child = 2 * i + 1
                    if child >= size:
                        break
                    if child + 1 < size and heap_d[child + 1] < heap_d[child]:
                        child += 1
                    if heap_d[child] >= nd:
                        break
                    heap_d[i] = heap_d[child]
                    heap_v[i] = heap_v[child]
                    i = child
                heap_d[i] = nd
                heap_v[i] = v
            if done[u]:
                continue
            done[u] = 1
            if 0 <= hop_limit <= hops[u]:
                continue
            for e in range(ipt[u], ipt[u + 1]):
                v = idx[e]
                nd = du + wts[e]
                if nd < dist[v]:
                    dist[v] = nd
                    hops[v] = hops[u] + 1
                    # push: append and sift up
                    i = size
                    size += 1
                    while i > 0:
                        parent = (i - 1) // 2
                        if heap_d[parent] <= nd:
                            break
                        heap_d[i] = heap_d[parent]
                        heap_v[i] = heap_v[parent]
                        i = parent
                    heap_d[i] = nd
                    heap_v[i] = v
        for i in range(n):
            out[s, i] = dist[i]
    return out_np
