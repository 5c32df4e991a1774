"""Kernel functions and Gram-matrix construction.

Supports Gaussian (RBF), inhomogeneous polynomial and linear kernels, plus
rectangular kernel blocks between a training set and out-of-sample query
points. Gram matrices are dense, exactly symmetric, and may carry a diagonal
ridge for invertibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAUSSIAN = "gaussian"
POLYNOMIAL = "polynomial"
LINEAR = "linear"

_KINDS = (GAUSSIAN, POLYNOMIAL, LINEAR)


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of a kernel function.

    ``sigma`` is the Gaussian bandwidth, ``degree``/``offset`` parameterize
    the polynomial kernel (x.y + offset)^degree. ``distance_exponent``
    selects whether the Gaussian exponent holds the Euclidean distance (1)
    or its square (2, the default and the conventional choice).
    """

    kind: str = GAUSSIAN
    sigma: float = 1.0
    degree: int = 3
    offset: float = 1.0
    distance_exponent: int = 2

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == GAUSSIAN and not self.sigma > 0:
            raise ValueError(f"Gaussian kernel needs sigma > 0, got {self.sigma}")
        if self.kind == POLYNOMIAL and self.degree < 1:
            raise ValueError(f"polynomial kernel needs degree >= 1, got {self.degree}")
        if self.offset < 0:
            raise ValueError(f"polynomial offset must be >= 0, got {self.offset}")
        if self.distance_exponent not in (1, 2):
            raise ValueError(f"distance_exponent must be 1 or 2, got {self.distance_exponent}")


@dataclass(frozen=True)
class GramMatrix:
    """Dense symmetric kernel matrix with the ridge already added to the diagonal."""

    values: np.ndarray
    ridge: float = 0.0

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _check_points(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"point dimensions differ: {x.shape} vs {y.shape}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("non-finite coordinates in kernel input")


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for a single pair of points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_points(x, y)
    if spec.kind == LINEAR:
        return float(x @ y)
    if spec.kind == POLYNOMIAL:
        return float((x @ y + spec.offset) ** spec.degree)
    d2 = float(np.sum((x - y) ** 2))
    d = d2 if spec.distance_exponent == 2 else np.sqrt(d2)
    return float(np.exp(-d / (2.0 * spec.sigma**2)))


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # |a_i - b_j|^2 via the inner-product expansion; clipped against fp negatives
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0)


def _kernel_block(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if spec.kind == LINEAR:
        return a @ b.T
    if spec.kind == POLYNOMIAL:
        return (a @ b.T + spec.offset) ** spec.degree
    d = _pairwise_sq_dists(a, b)
    if spec.distance_exponent == 1:
        d = np.sqrt(d)
    return np.exp(-d / (2.0 * spec.sigma**2))


def _as_matrix(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError(f"points must form an (n, m) array, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("non-finite coordinates in kernel input")
    return pts


def gram(spec: KernelSpec, points, ridge: float = 0.0) -> GramMatrix:
    """Build the n x n Gram matrix K + ridge*I over a point set.

    The result is exactly symmetric; the Gaussian diagonal is exactly
    1 + ridge (zero self-distance is enforced, not recomputed).
    """
    pts = _as_matrix(points)
    if pts.shape[0] == 0:
        raise ValueError("gram() needs at least one point")
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    k = _kernel_block(spec, pts, pts)
    k = (k + k.T) / 2.0
    if spec.kind == GAUSSIAN:
        np.fill_diagonal(k, 1.0)
    if ridge:
        k = k + ridge * np.eye(pts.shape[0])
    return GramMatrix(values=k, ridge=float(ridge))


def cross_gram(spec: KernelSpec, train, query) -> np.ndarray:
    """Rectangular kernel block: entry (q, i) = k(x_i, x_q) for out-of-sample evaluation."""
    tr = _as_matrix(train)
    qu = _as_matrix(query)
    if tr.shape[1] != qu.shape[1]:
        raise ValueError(f"feature dimensions differ: train has {tr.shape[1]}, query has {qu.shape[1]}")
    return _kernel_block(spec, qu, tr)


def default_ridge(gram_values: np.ndarray) -> float:
    """Fallback diagonal regularizer when a Gram matrix must be inverted but is singular."""
    return 1e-6 * float(np.mean(np.diag(gram_values)))
