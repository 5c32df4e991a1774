import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from lapsvm.graph import BINARY, HEAT, GraphSpec, Laplacian, intrinsic_norm, knn_adjacency, laplacian


def _brute_force_neighbors(pts, nn):
    n = len(pts)
    out = set()
    for i in range(n):
        d = [(np.sum((pts[i] - pts[j]) ** 2), j) for j in range(n) if j != i]
        d.sort()  # ties resolved by index because of tuple ordering
        for _, j in d[:nn]:
            out.add((i, j))
    return out


def test_two_points_single_neighbor():
    w = knn_adjacency(np.array([[0.0], [1.0]]), GraphSpec(nn=1))
    assert np.array_equal(w.toarray(), [[0.0, 1.0], [1.0, 0.0]])


def test_collinear_union_symmetrization():
    pts = np.array([[0.0], [1.0], [2.0]])
    w = knn_adjacency(pts, GraphSpec(nn=1))
    # directed edges 0->1, 1->0 (index tie-break), 2->1; union connects the middle to both
    assert np.array_equal(w.toarray(), [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    directed = _brute_force_neighbors(pts, 1)
    expected = np.zeros((3, 3))
    for i, j in directed:
        expected[i, j] = 1
        expected[j, i] = 1
    assert np.array_equal(w.toarray(), expected)


def test_union_matches_brute_force_oracle():
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((20, 3))
    nn = 4
    w = knn_adjacency(pts, GraphSpec(nn=nn))
    directed = _brute_force_neighbors(pts, nn)
    expected = np.zeros((20, 20))
    for i, j in directed:
        expected[i, j] = 1
        expected[j, i] = 1
    assert np.array_equal(w.toarray(), expected)


def test_heat_weight_unit_for_duplicates():
    pts = np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]])
    w = knn_adjacency(pts, GraphSpec(nn=1, weight=HEAT, heat_t=0.5))
    assert w[0, 1] == 1.0 and w[1, 0] == 1.0


def test_nn_too_large_raises():
    with pytest.raises(ValueError):
        knn_adjacency(np.zeros((3, 2)), GraphSpec(nn=3))


def test_laplacian_two_node_examples():
    w = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    l1 = laplacian(w, GraphSpec(nn=1, power=1))
    assert np.array_equal(l1.matrix.toarray(), [[1.0, -1.0], [-1.0, 1.0]])
    l1n = laplacian(w, GraphSpec(nn=1, power=1, normalize=True))
    assert np.allclose(l1n.matrix.toarray(), [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)
    l2 = laplacian(w, GraphSpec(nn=1, power=2))
    assert np.allclose(l2.matrix.toarray(), [[2.0, -2.0], [-2.0, 2.0]], atol=1e-15)


def test_normalize_isolated_node_raises():
    w = sp.csr_matrix(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    with pytest.raises(ValueError, match="node 2"):
        laplacian(w, GraphSpec(nn=1, normalize=True))


def test_intrinsic_norm_examples():
    w = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    lap = laplacian(w, GraphSpec(nn=1))
    assert intrinsic_norm(lap, [3.0, 3.0]) == 0.0
    assert intrinsic_norm(lap, [1.0, -1.0]) == 4.0
    with pytest.raises(ValueError):
        intrinsic_norm(lap, [1.0, 2.0, 3.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_quadratic_form_equals_pairwise_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 16))
    pts = rng.standard_normal((n, 2))
    spec = GraphSpec(nn=int(rng.integers(1, min(5, n - 1) + 1)))
    w = knn_adjacency(pts, spec)
    lap = laplacian(w, spec)
    f = rng.standard_normal(n)
    dense_w = w.toarray()
    oracle = 0.5 * sum(
        dense_w[i, j] * (f[i] - f[j]) ** 2 for i in range(n) for j in range(n)
    )
    value = intrinsic_norm(lap, f)
    assert value == pytest.approx(oracle, rel=1e-9, abs=1e-12)


def test_constant_vector_annihilated():
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((30, 4))
    spec = GraphSpec(nn=5)
    lap = laplacian(knn_adjacency(pts, spec), spec)
    ones = np.ones(30)
    assert np.abs(lap.matrix @ ones).max() <= 1e-10


@pytest.mark.parametrize("normalize", [False, True])
@pytest.mark.parametrize("power", [1, 2, 3])
def test_psd_random_quadratic_forms(normalize, power):
    rng = np.random.default_rng(2)
    pts = rng.standard_normal((25, 3))
    spec = GraphSpec(nn=4, normalize=normalize, power=power)
    lap = laplacian(knn_adjacency(pts, spec), spec)
    for _ in range(50):
        f = rng.standard_normal(25)
        assert intrinsic_norm(lap, f) >= -1e-10


def test_symmetry_of_matrix():
    rng = np.random.default_rng(4)
    pts = rng.standard_normal((15, 2))
    spec = GraphSpec(nn=3, normalize=True, power=4)
    lap = laplacian(knn_adjacency(pts, spec), spec)
    diff = (lap.matrix - lap.matrix.T).toarray()
    assert np.abs(diff).max() == 0.0


def test_sparsity_bound_power_one():
    rng = np.random.default_rng(5)
    n, nn = 60, 7
    pts = rng.standard_normal((n, 3))
    spec = GraphSpec(nn=nn)
    lap = laplacian(knn_adjacency(pts, spec), spec)
    assert lap.matrix.nnz <= n * (2 * nn + 1)


def test_densify_path_matches_sparse_path():
    rng = np.random.default_rng(6)
    pts = rng.standard_normal((20, 2))
    spec = GraphSpec(nn=4, power=3, normalize=True)
    w = knn_adjacency(pts, spec)
    dense_route = laplacian(w, spec, densify_at=0.0).matrix.toarray()
    sparse_route = laplacian(w, spec, densify_at=1.1).matrix.toarray()
    assert np.allclose(dense_route, sparse_route, atol=1e-12)


def test_graph_spec_validation():
    with pytest.raises(ValueError):
        GraphSpec(nn=0)
    with pytest.raises(ValueError):
        GraphSpec(weight="gauss")
    with pytest.raises(ValueError):
        GraphSpec(weight=HEAT, heat_t=0.0)
    with pytest.raises(ValueError):
        GraphSpec(power=0)
    assert GraphSpec(weight=BINARY).weight == BINARY
