"""Shortest-path completion of sparse graphs into full distance matrices."""

import numpy as np
import pytest

from geosim import geodesic as geo
from geosim.geodesic import DistanceMatrix, all_pairs_geodesic, geodesic_backend
from geosim.graphs import StructureGraph


def floyd_warshall(n, edges, weights):
    """Independent dense all-pairs oracle."""
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for (i, j), w in zip(edges, weights):
        d[i, j] = min(d[i, j], w)
        d[j, i] = min(d[j, i], w)
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


def random_graph(rng, n, extra=1.5):
    """Random connected graph: spanning tree plus extra random edges."""
    edges = {}
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges[(u, v)] = float(rng.uniform(0.1, 2.0))
    for _ in range(int(extra * n)):
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        key = (min(int(i), int(j)), max(int(i), int(j)))
        if key not in edges:
            edges[key] = float(rng.uniform(0.1, 2.0))
    pairs = sorted(edges)
    return pairs, [edges[p] for p in pairs]


def test_path_graph_distances():
    g = StructureGraph(n=4, edges=[[0, 1], [1, 2], [2, 3]], weights=[1.0, 2.0, 3.0])
    dm = all_pairs_geodesic(g)
    expected = np.array(
        [
            [0.0, 1.0, 3.0, 6.0],
            [1.0, 0.0, 2.0, 5.0],
            [3.0, 2.0, 0.0, 3.0],
            [6.0, 5.0, 3.0, 0.0],
        ]
    )
    assert np.array_equal(dm.d, expected)
    assert dm.finite_max == 6.0 and dm.disconnected_fill == 12.0


def test_disconnected_components_filled_with_twice_max():
    g = StructureGraph(n=4, edges=[[0, 1], [2, 3]], weights=[1.0, 0.5])
    dm = all_pairs_geodesic(g)
    expected = np.array(
        [
            [0.0, 1.0, 2.0, 2.0],
            [1.0, 0.0, 2.0, 2.0],
            [2.0, 2.0, 0.0, 0.5],
            [2.0, 2.0, 0.5, 0.0],
        ]
    )
    assert np.array_equal(dm.d, expected)
    assert dm.disconnected_fill == 2.0 and dm.finite_max == 1.0


def test_graph_with_no_edges_fills_zero():
    g = StructureGraph(n=3, edges=np.zeros((0, 2), dtype=np.int64), weights=[])
    dm = all_pairs_geodesic(g)
    assert np.array_equal(dm.d, np.zeros((3, 3)))
    assert dm.disconnected_fill == 0.0


def test_explicit_fill_override():
    g = StructureGraph(n=3, edges=[[0, 1]], weights=[1.0])
    dm = all_pairs_geodesic(g, disconnected_fill=7.5)
    assert dm.d[0, 2] == 7.5 and dm.d[2, 1] == 7.5
    with pytest.raises(ValueError, match="fill"):
        all_pairs_geodesic(g, disconnected_fill=0.5)


def test_triangle_inequality_on_random_graph():
    rng = np.random.default_rng(11)
    pairs, weights = random_graph(rng, 30)
    g = StructureGraph(n=30, edges=pairs, weights=weights)
    d = all_pairs_geodesic(g).d
    via = d[:, :, None] + d.T[None, :, :]  # via[i, k, j] = d(i,k) + d(k,j)
    assert (d[:, None, :] <= via + 1e-9).all()


@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_random_graphs_match_floyd_warshall(backend):
    if backend == "compiled" and geodesic_backend() != "compiled":
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(101)
    for _ in range(20):
        n = int(rng.integers(2, 41))
        pairs, weights = random_graph(rng, n)
        g = StructureGraph(n=n, edges=pairs, weights=weights)
        dm = all_pairs_geodesic(g, backend=backend)
        oracle = floyd_warshall(n, pairs, weights)
        assert np.max(np.abs(dm.d - oracle)) <= 1e-9


def test_backends_agree_exactly():
    if geodesic_backend() != "compiled":
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(5)
    pairs, weights = random_graph(rng, 60)
    g = StructureGraph(n=60, edges=pairs, weights=weights)
    a = all_pairs_geodesic(g, backend="compiled").d
    b = all_pairs_geodesic(g, backend="python").d
    assert np.array_equal(a, b)


def test_unknown_backend_rejected():
    g = StructureGraph(n=2, edges=[[0, 1]], weights=[1.0])
    with pytest.raises(ValueError, match="backend"):
        all_pairs_geodesic(g, backend="gpu")


def test_permutation_equivariance():
    rng = np.random.default_rng(23)
    pairs, weights = random_graph(rng, 25)
    g = StructureGraph(n=25, edges=pairs, weights=weights)
    base = all_pairs_geodesic(g).d

    perm = rng.permutation(25)
    mapped = {}
    for (i, j), w in zip(pairs, weights):
        a, b = int(perm[i]), int(perm[j])
        mapped[(min(a, b), max(a, b))] = w
    mp = sorted(mapped)
    g2 = StructureGraph(n=25, edges=mp, weights=[mapped[p] for p in mp])
    permuted = all_pairs_geodesic(g2).d
    assert np.max(np.abs(permuted[np.ix_(perm, perm)] - base)) < 1e-12


def test_hop_limit_truncates_long_paths():
    g = StructureGraph(n=3, edges=[[0, 1], [1, 2]], weights=[1.0, 5.0])
    full = all_pairs_geodesic(g)
    assert full.d[0, 2] == 6.0
    limited = all_pairs_geodesic(g, hop_limit=1)
    # two-hop route is out of reach, so 0 and 2 fall in separate components
    assert limited.d[0, 2] == 10.0
    assert limited.disconnected_fill == 10.0
    with pytest.raises(ValueError, match="hop_limit"):
        all_pairs_geodesic(g, hop_limit=0)


def test_distance_matrix_validation():
    def make(values):
        return DistanceMatrix(d=np.asarray(values, dtype=np.float64),
                              disconnected_fill=1.0, finite_max=1.0)

    with pytest.raises(ValueError, match="square"):
        make(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="symmetric"):
        make([[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(ValueError, match="diagonal"):
        make([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="finite"):
        make([[0.0, np.inf], [np.inf, 0.0]])
    with pytest.raises(ValueError, match="negative"):
        make([[0.0, -1.0], [-1.0, 0.0]])


def test_from_dense_symmetrizes_with_min():
    raw = np.array([[0.05, 1.0], [3.0, 0.9]])
    dm = DistanceMatrix.from_dense(raw)
    assert dm.d[0, 1] == dm.d[1, 0] == 1.0
    assert dm.d[0, 0] == 0.0 and dm.d[1, 1] == 0.0
    assert dm.finite_max == 1.0 and dm.disconnected_fill == 1.0


def test_module_exposes_backend_name():
    assert geodesic_backend() in ("compiled", "python")
    assert geo.geodesic_backend() == geodesic_backend()
