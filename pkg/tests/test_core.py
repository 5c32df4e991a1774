import tracemalloc

import numpy as np
import pytest
import scipy.sparse as sp

from lapsvm.core import (
    PrimalState,
    Problem,
    gradient,
    hessian,
    objective,
    preconditioned_gradient,
    refresh_error_set,
)
from lapsvm.graph import GraphSpec, knn_adjacency, laplacian
from util import random_problem, random_state


def _objective_reference(problem, alpha, b):
    # straight-line re-implementation: hinge sum + quadratic forms, no caching
    k = problem.K
    f = k @ alpha + b
    total = 0.0
    for i in range(problem.l):
        total += max(1.0 - problem.y[i] * f[i], 0.0) ** 2
    total += problem.gamma_a * alpha @ k @ alpha
    if problem.gamma_i > 0:
        ka = k @ alpha
        total += problem.gamma_i * ka @ problem.L.toarray() @ ka
    return 0.5 * total


def test_objective_zero_state_is_half_l():
    p = random_problem(np.random.default_rng(0), n=18, l=7)
    s = PrimalState.zero(p)
    assert objective(p, s) == pytest.approx(p.l / 2.0, abs=1e-12)


def test_objective_margin_exactly_met_is_zero():
    # all labels +1 and b = 1: every margin is exactly 1, losses and regularizers vanish
    rng = np.random.default_rng(1)
    p = random_problem(rng, n=12, l=5)
    y = np.zeros(12)
    y[:5] = 1.0
    p = Problem(K=p.K, L=p.L, y=y, l=5, gamma_a=p.gamma_a, gamma_i=p.gamma_i)
    s = PrimalState(alpha=np.zeros(12), b=1.0)
    assert objective(p, s) == 0.0


def test_objective_matches_reference_formula():
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = random_problem(rng, n=15, l=6)
        s = random_state(rng, p)
        ref = _objective_reference(p, s.alpha, s.b)
        assert objective(p, s) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_gradient_at_zero_state():
    rng = np.random.default_rng(3)
    p = random_problem(rng, n=14, l=6)
    s = PrimalState.zero(p)
    gb, ga = gradient(p, s)
    assert gb == pytest.approx(-p.y[: p.l].sum(), abs=1e-12)
    assert np.allclose(ga, -p.K @ p.y, atol=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(8):
        p = random_problem(rng, n=16, l=7)
        s = random_state(rng, p, margin_guard=1e-4)
        gb, ga = gradient(p, s)

        def obj_at(alpha, b):
            return objective(p, PrimalState(alpha=alpha, b=b))

        fd_b = (obj_at(s.alpha, s.b + h) - obj_at(s.alpha, s.b - h)) / (2 * h)
        assert abs(fd_b - gb) <= 1e-5 * (1.0 + abs(gb))
        for i in range(p.n):
            e = np.zeros(p.n)
            e[i] = h
            fd = (obj_at(s.alpha + e, s.b) - obj_at(s.alpha - e, s.b)) / (2 * h)
            assert abs(fd - ga[i]) <= 1e-5 * (1.0 + abs(ga[i]))


def test_directional_derivative_consistency():
    rng = np.random.default_rng(5)
    h = 1e-6
    for _ in range(10):
        p = random_problem(rng, n=14, l=6)
        s = random_state(rng, p, margin_guard=1e-4)
        gb, ga = gradient(p, s)
        d_b = float(rng.standard_normal())
        d_a = rng.standard_normal(p.n)
        analytic = gb * d_b + ga @ d_a
        plus = objective(p, PrimalState(alpha=s.alpha + h * d_a, b=s.b + h * d_b))
        minus = objective(p, PrimalState(alpha=s.alpha - h * d_a, b=s.b - h * d_b))
        fd = (plus - minus) / (2 * h)
        assert fd == pytest.approx(analytic, rel=1e-5, abs=1e-7)


def test_objective_convexity():
    rng = np.random.default_rng(6)
    for _ in range(20):
        p = random_problem(rng, n=12, l=5)
        s1, s2 = random_state(rng, p), random_state(rng, p)
        lam = float(rng.uniform(0.05, 0.95))
        mid = PrimalState(alpha=lam * s1.alpha + (1 - lam) * s2.alpha, b=lam * s1.b + (1 - lam) * s2.b)
        assert objective(p, mid) <= lam * objective(p, s1) + (1 - lam) * objective(p, s2) + 1e-10


def test_preconditioned_gradient_at_zero():
    rng = np.random.default_rng(7)
    p = random_problem(rng, n=13, l=5)
    s = PrimalState.zero(p)
    gb, pg = preconditioned_gradient(p, s)
    assert gb == pytest.approx(-p.y[: p.l].sum(), abs=1e-12)
    assert np.allclose(pg, -p.y, atol=1e-12)


def test_preconditioned_gradient_identity_kernel():
    # K = I makes the preconditioner the identity, so both gradients coincide
    rng = np.random.default_rng(8)
    n, l = 10, 4
    y = np.zeros(n)
    y[:l] = rng.choice([-1.0, 1.0], size=l)
    p = Problem(K=np.eye(n), L=None, y=y, l=l, gamma_a=0.3, gamma_i=0.0)
    s = random_state(rng, p)
    gb1, ga = gradient(p, s)
    gb2, pg = preconditioned_gradient(p, s)
    assert gb1 == gb2
    assert np.allclose(ga, pg, atol=1e-14)


def test_preconditioned_gradient_multiply_back():
    rng = np.random.default_rng(9)
    for _ in range(10):
        p = random_problem(rng, n=17, l=8)
        s = random_state(rng, p)
        _, ga = gradient(p, s)
        _, pg = preconditioned_gradient(p, s)
        assert np.linalg.norm(p.K @ pg - ga) <= 1e-8 * (1.0 + np.linalg.norm(ga))


def test_hessian_empty_error_set():
    rng = np.random.default_rng(10)
    p = random_problem(rng, n=12, l=5)
    y = np.zeros(12)
    y[:5] = 1.0
    p = Problem(K=p.K, L=p.L, y=y, l=5, gamma_a=p.gamma_a, gamma_i=p.gamma_i)
    s = PrimalState(alpha=np.zeros(12), b=5.0)  # all margins 5 > 1
    refresh_error_set(p, s)
    assert not s.error_mask.any()
    h = hessian(p, s)
    lk = p.L.toarray() @ p.K
    expected = p.gamma_a * p.K + p.gamma_i * (p.K @ lk)
    assert np.allclose(h[0, :], 0.0, atol=1e-15)
    assert np.allclose(h[:, 0], 0.0, atol=1e-15)
    assert np.allclose(h[1:, 1:], (expected + expected.T) / 2, atol=1e-12)


def test_hessian_two_point_identity_kernel_by_hand():
    # K = I, no Laplacian, both points labeled and in E at the zero state:
    # H = [[2, 1, 1], [1, 1 + ga, 0], [1, 0, 1 + ga]]
    ga = 0.7
    p = Problem(K=np.eye(2), L=None, y=np.array([1.0, -1.0]), l=2, gamma_a=ga, gamma_i=0.0)
    s = PrimalState.zero(p)
    h = hessian(p, s)
    expected = np.array([[2.0, 1.0, 1.0], [1.0, 1.0 + ga, 0.0], [1.0, 0.0, 1.0 + ga]])
    assert np.allclose(h, expected, atol=1e-15)


def test_hessian_matches_gradient_finite_differences():
    rng = np.random.default_rng(11)
    h_step = 1e-6
    for _ in range(5):
        p = random_problem(rng, n=12, l=5)
        s = random_state(rng, p, margin_guard=1e-4)
        h = hessian(p, s)
        fd = np.zeros_like(h)

        def grad_at(alpha, b):
            gb, ga = gradient(p, PrimalState(alpha=alpha, b=b))
            return np.concatenate([[gb], ga])

        for j in range(p.n + 1):
            zp = np.concatenate([[s.b], s.alpha])
            zm = zp.copy()
            zp[j] += h_step
            zm[j] -= h_step
            fd[:, j] = (grad_at(zp[1:], zp[0]) - grad_at(zm[1:], zm[0])) / (2 * h_step)
        scale = max(1.0, np.abs(h).max())
        assert np.abs(fd - h).max() / scale <= 1e-4


def test_hessian_symmetric():
    rng = np.random.default_rng(12)
    p = random_problem(rng, n=15, l=6)
    s = random_state(rng, p)
    h = hessian(p, s)
    assert np.array_equal(h, h.T)


def test_refresh_error_set_examples():
    rng = np.random.default_rng(13)
    p = random_problem(rng, n=12, l=5)
    s = PrimalState.zero(p)
    refresh_error_set(p, s)
    assert s.error_mask[: p.l].all() and not s.error_mask[p.l :].any()

    # margin exactly 1 is not an error vector (strict inequality)
    y = np.zeros(12)
    y[:5] = 1.0
    y[0] = -1.0
    p2 = Problem(K=p.K, L=p.L, y=y, l=5, gamma_a=0.5, gamma_i=0.5)
    s2 = PrimalState(alpha=np.zeros(12), b=1.0)
    refresh_error_set(p2, s2)
    assert not s2.error_mask[1:5].any()  # +1-labeled points sit exactly at margin 1
    assert s2.error_mask[0]  # the -1 point has margin -1 < 1


def test_refresh_error_set_loop_oracle():
    rng = np.random.default_rng(14)
    for _ in range(10):
        p = random_problem(rng, n=14, l=6)
        s = random_state(rng, p)
        f = p.K @ s.alpha + s.b
        expected = [i for i in range(p.l) if p.y[i] * f[i] < 1.0]
        assert sorted(np.flatnonzero(s.error_mask)) == expected


def test_empty_error_set_gradient_is_pure_regularizer():
    rng = np.random.default_rng(15)
    p = random_problem(rng, n=12, l=5)
    y = np.zeros(12)
    y[:5] = 1.0
    p = Problem(K=p.K, L=p.L, y=y, l=5, gamma_a=0.4, gamma_i=0.6)
    alpha = 0.01 * rng.standard_normal(12)
    f = p.K @ alpha
    b = float(2.0 + np.abs(f).max())  # pushes every +1 margin above 1
    s = PrimalState(alpha=alpha, b=b)
    refresh_error_set(p, s)
    assert not s.error_mask.any()
    gb, ga = gradient(p, s)
    ka = p.K @ alpha
    expected = p.gamma_a * p.K @ alpha + p.gamma_i * p.K @ (p.L @ ka)
    assert gb == 0.0
    assert np.allclose(ga, expected, atol=1e-12)


def test_gradient_never_materializes_matrix_product():
    # allocation budget: the gradient may allocate O(n) vectors but not an
    # n x n intermediate (K @ L would be ~11 MB at this size)
    rng = np.random.default_rng(16)
    n, l = 1200, 100
    pts = rng.standard_normal((n, 3))
    spec = GraphSpec(nn=5)
    lap = laplacian(knn_adjacency(pts, spec), spec)
    k = np.exp(-((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1) / 2.0)
    k[np.diag_indices(n)] += 1e-6
    y = np.zeros(n)
    y[:l] = rng.choice([-1.0, 1.0], size=l)
    p = Problem(K=k, L=lap, y=y, l=l, gamma_a=0.5, gamma_i=0.5)
    s = PrimalState(alpha=rng.standard_normal(n), b=0.1)
    refresh_error_set(p, s)
    gradient(p, s)  # warm-up allocations
    tracemalloc.start()
    gradient(p, s)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    assert peak < 40 * n * 8  # a handful of n-vectors, nowhere near n^2 * 8 bytes


def test_problem_validation():
    k = np.eye(4)
    with pytest.raises(ValueError):
        Problem(K=k, L=None, y=np.array([1.0, 0.5, 0.0, 0.0]), l=2, gamma_a=1.0, gamma_i=0.0)
    with pytest.raises(ValueError):
        Problem(K=k, L=None, y=np.array([1.0, -1.0, 1.0, 0.0]), l=2, gamma_a=1.0, gamma_i=0.0)
    with pytest.raises(ValueError):
        Problem(K=k, L=None, y=np.array([1.0, -1.0, 0.0, 0.0]), l=2, gamma_a=0.0, gamma_i=0.0)
    with pytest.raises(ValueError):
        Problem(K=k, L=None, y=np.array([1.0, -1.0, 0.0, 0.0]), l=2, gamma_a=1.0, gamma_i=0.5)
    with pytest.raises(ValueError):
        Problem(K=np.zeros((4, 3)), L=None, y=np.zeros(4), l=1, gamma_a=1.0, gamma_i=0.0)


def test_problem_accepts_sparse_and_dense_laplacian():
    y = np.array([1.0, -1.0, 0.0])
    dense = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    p1 = Problem(K=np.eye(3), L=dense, y=y, l=2, gamma_a=1.0, gamma_i=1.0)
    p2 = Problem(K=np.eye(3), L=sp.csr_matrix(dense), y=y, l=2, gamma_a=1.0, gamma_i=1.0)
    s = PrimalState(alpha=np.array([1.0, 2.0, -1.0]), b=0.0)
    assert objective(p1, s.copy()) == objective(p2, s.copy())
