import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lapsvm.kernels import GAUSSIAN, LINEAR, POLYNOMIAL, KernelSpec, cross_gram, eval_kernel, gram

ALL_SPECS = [
    KernelSpec(kind=GAUSSIAN, sigma=1.3),
    KernelSpec(kind=GAUSSIAN, sigma=0.7, distance_exponent=1),
    KernelSpec(kind=POLYNOMIAL, degree=3, offset=1.0),
    KernelSpec(kind=LINEAR),
]


def test_gaussian_same_point_is_one():
    spec = KernelSpec(kind=GAUSSIAN, sigma=3.7)
    assert eval_kernel(spec, [1.0, -2.0], [1.0, -2.0]) == 1.0


def test_linear_dot_product():
    assert eval_kernel(KernelSpec(kind=LINEAR), [1.0, 2.0], [3.0, 4.0]) == 11.0


def test_gaussian_squared_distance_value():
    # sigma=1, squared exponent, points at distance 2: exp(-4/2) = exp(-2)
    spec = KernelSpec(kind=GAUSSIAN, sigma=1.0, distance_exponent=2)
    assert eval_kernel(spec, [0.0], [2.0]) == pytest.approx(np.exp(-2.0), abs=1e-12)


def test_gaussian_unsquared_distance_value():
    spec = KernelSpec(kind=GAUSSIAN, sigma=1.0, distance_exponent=1)
    assert eval_kernel(spec, [0.0], [2.0]) == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        eval_kernel(KernelSpec(), [1.0], [1.0, 2.0])


def test_non_finite_raises():
    with pytest.raises(ValueError):
        eval_kernel(KernelSpec(), [np.nan], [1.0])


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(kind="rbfish")
    with pytest.raises(ValueError):
        KernelSpec(kind=GAUSSIAN, sigma=0.0)
    with pytest.raises(ValueError):
        KernelSpec(kind=POLYNOMIAL, degree=0)
    with pytest.raises(ValueError):
        KernelSpec(distance_exponent=3)


def test_gram_single_point():
    g = gram(KernelSpec(kind=GAUSSIAN, sigma=2.0), [[3.0, 1.0]], ridge=0.0)
    assert g.values.shape == (1, 1)
    assert g.values[0, 0] == 1.0


def test_gram_two_identical_points():
    g = gram(KernelSpec(kind=GAUSSIAN, sigma=1.0), [[1.0, 2.0], [1.0, 2.0]])
    assert np.allclose(g.values, np.ones((2, 2)), atol=0)


def test_gram_empty_raises():
    with pytest.raises(ValueError):
        gram(KernelSpec(), np.zeros((0, 2)))


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_gram_matches_elementwise_oracle(spec):
    rng = np.random.default_rng(7)
    pts = rng.standard_normal((5, 3))
    g = gram(spec, pts)
    for i in range(5):
        for j in range(5):
            assert abs(g.values[i, j] - eval_kernel(spec, pts[i], pts[j])) <= 1e-12


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_gram_symmetric_and_ridge_identity(spec):
    rng = np.random.default_rng(11)
    pts = rng.standard_normal((8, 4))
    base = gram(spec, pts, ridge=0.0)
    ridged = gram(spec, pts, ridge=0.25)
    assert np.array_equal(base.values, base.values.T)
    assert np.array_equal(ridged.values, base.values + 0.25 * np.eye(8))


def test_gaussian_gram_diag_is_one_plus_ridge():
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((6, 5))
    g = gram(KernelSpec(kind=GAUSSIAN, sigma=0.9), pts, ridge=1e-3)
    assert np.array_equal(np.diag(g.values), np.full(6, 1.0 + 1e-3))


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=0, max_value=3),
    st.lists(st.floats(-50, 50), min_size=1, max_size=6),
    st.lists(st.floats(-50, 50), min_size=1, max_size=6),
)
def test_kernel_exchangeable(spec_idx, xs, ys):
    m = min(len(xs), len(ys))
    x, y = np.array(xs[:m]), np.array(ys[:m])
    spec = ALL_SPECS[spec_idx]
    assert eval_kernel(spec, x, y) == pytest.approx(eval_kernel(spec, y, x), rel=1e-14, abs=1e-14)


def test_cross_gram_query_equals_train():
    rng = np.random.default_rng(5)
    pts = rng.standard_normal((6, 3))
    spec = KernelSpec(kind=GAUSSIAN, sigma=1.1)
    kq = cross_gram(spec, pts, pts)
    assert np.allclose(kq, gram(spec, pts, ridge=0.0).values, atol=1e-12)


def test_cross_gram_single_query_matches_column():
    rng = np.random.default_rng(6)
    pts = rng.standard_normal((7, 2))
    spec = KernelSpec(kind=GAUSSIAN, sigma=0.8)
    k = gram(spec, pts, ridge=0.0).values
    row = cross_gram(spec, pts, pts[4][None, :])
    assert np.allclose(row[0], k[:, 4], atol=1e-12)


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_cross_gram_rectangular_oracle(spec):
    rng = np.random.default_rng(9)
    train = rng.standard_normal((3, 4))
    query = rng.standard_normal((2, 4))
    kq = cross_gram(spec, train, query)
    assert kq.shape == (2, 3)
    for q in range(2):
        for i in range(3):
            assert abs(kq[q, i] - eval_kernel(spec, train[i], query[q])) <= 1e-12


def test_cross_gram_dimension_mismatch():
    with pytest.raises(ValueError):
        cross_gram(KernelSpec(), np.zeros((2, 3)), np.zeros((2, 4)))
