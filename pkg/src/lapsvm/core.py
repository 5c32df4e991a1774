"""Primal problem state for L2-hinge manifold-regularized classifiers.

The decision function is f(x) = sum_i alpha_i k(x_i, x) + b over all n
training points (labeled and unlabeled). For a state z = (b, alpha) the
objective is

    obj(z) = 1/2 [ sum_{i<=l} max(1 - y_i f_i, 0)^2
                   + gamma_a alpha' K alpha
                   + gamma_i (K alpha)' L (K alpha) ]

with f = K alpha + 1 b. The set of error vectors E collects the labeled
points with strictly positive hinge loss (y_i f_i < 1); it selects the
active quadratic piece, and the generalized Hessian treats points exactly
at margin 1 as outside E. The bias is unregularized and excluded from the
intrinsic term.

Everything here works with matrix-vector products only: the n x n product
of K and L is never formed (that is the point of the preconditioned
gradient, whose alpha-block I_E(f - y) + gamma_a alpha + gamma_i L K alpha
costs nothing beyond the cached K alpha).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from lapsvm.graph import Laplacian
from lapsvm.kernels import GramMatrix


def _as_laplacian_matrix(lap) -> sp.csr_matrix | None:
    if lap is None:
        return None
    if isinstance(lap, Laplacian):
        return lap.matrix
    if sp.issparse(lap):
        return sp.csr_matrix(lap)
    return sp.csr_matrix(np.asarray(lap, dtype=float))


@dataclass(frozen=True)
class Problem:
    """Immutable training problem: kernel matrix, Laplacian, labels, weights.

    ``y`` holds the l labels (+-1) in the first l positions and zeros for the
    u unlabeled points. ``K`` is the (ridged) Gram matrix; ``L`` may be None
    when gamma_i == 0, in which case every intrinsic-term product is skipped
    and the supervised L2-SVM baseline falls out.
    """

    K: np.ndarray
    L: sp.csr_matrix | None
    y: np.ndarray
    l: int
    gamma_a: float
    gamma_i: float

    def __post_init__(self):
        k = np.asarray(self.K, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "K", k)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "L", _as_laplacian_matrix(self.L))
        n = k.shape[0]
        if k.shape != (n, n):
            raise ValueError(f"K must be square, got shape {k.shape}")
        if y.shape != (n,):
            raise ValueError(f"labels must have length n={n}, got {y.shape}")
        if not 1 <= self.l <= n:
            raise ValueError(f"labeled count l={self.l} out of range for n={n}")
        if not np.all(np.abs(y[: self.l]) == 1):
            raise ValueError("first l label entries must be +-1")
        if np.any(y[self.l :] != 0):
            raise ValueError("unlabeled label entries (positions > l) must be 0")
        if not self.gamma_a > 0:
            raise ValueError(f"gamma_a must be > 0, got {self.gamma_a}")
        if self.gamma_i < 0:
            raise ValueError(f"gamma_i must be >= 0, got {self.gamma_i}")
        if self.gamma_i > 0 and self.L is None:
            raise ValueError("gamma_i > 0 requires a Laplacian")

    @classmethod
    def from_parts(
        cls,
        gram_matrix: GramMatrix,
        lap: Laplacian | None,
        labels,
        l: int,
        gamma_a: float,
        gamma_i: float,
    ) -> "Problem":
        return cls(K=gram_matrix.values, L=lap, y=labels, l=l, gamma_a=gamma_a, gamma_i=gamma_i)

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @property
    def u(self) -> int:
        return self.n - self.l

    def labeled_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[: self.l] = True
        return mask


@dataclass
class PrimalState:
    """Mutable solver state z = (b, alpha) with cached products.

    ``ka`` caches K alpha, ``lka`` caches L (K alpha) (zeros when gamma_i is
    0), and ``error_mask`` marks the current error vectors among the first l
    positions. The caches are valid only while ``fresh`` is True; solvers own
    one state each and call :func:`refresh_error_set` after mutating it.
    """

    alpha: np.ndarray
    b: float
    ka: np.ndarray | None = None
    lka: np.ndarray | None = None
    error_mask: np.ndarray | None = None
    fresh: bool = field(default=False)

    @classmethod
    def zero(cls, problem: Problem) -> "PrimalState":
        return cls(alpha=np.zeros(problem.n), b=0.0)

    def copy(self) -> "PrimalState":
        return PrimalState(
            alpha=self.alpha.copy(),
            b=self.b,
            ka=None if self.ka is None else self.ka.copy(),
            lka=None if self.lka is None else self.lka.copy(),
            error_mask=None if self.error_mask is None else self.error_mask.copy(),
            fresh=self.fresh,
        )

    def decision_values(self) -> np.ndarray:
        """f = K alpha + 1 b on the training points (requires fresh caches)."""
        if not self.fresh:
            raise ValueError("state caches are stale; call refresh_error_set first")
        return self.ka + self.b


def refresh_error_set(problem: Problem, state: PrimalState) -> PrimalState:
    """Recompute cached products and the error-vector set from (alpha, b).

    Membership is strict: a labeled point whose margin is exactly 1 is not an
    error vector, matching the generalized-Hessian convention.
    """
    state.ka = problem.K @ state.alpha
    if problem.gamma_i > 0:
        state.lka = problem.L @ state.ka
    else:
        state.lka = np.zeros(problem.n)
    f = state.ka + state.b
    mask = np.zeros(problem.n, dtype=bool)
    lab = slice(0, problem.l)
    mask[lab] = problem.y[lab] * f[lab] < 1.0
    state.error_mask = mask
    state.fresh = True
    return state


def _fresh(problem: Problem, state: PrimalState) -> PrimalState:
    if not state.fresh:
        refresh_error_set(problem, state)
    return state


def objective(problem: Problem, state: PrimalState) -> float:
    """Primal objective value at the state."""
    s = _fresh(problem, state)
    f = s.ka + s.b
    e = s.error_mask
    hinge = float(np.sum((1.0 - problem.y[e] * f[e]) ** 2))
    ambient = problem.gamma_a * float(s.alpha @ s.ka)
    intrinsic = problem.gamma_i * float(s.ka @ s.lka) if problem.gamma_i > 0 else 0.0
    return 0.5 * (hinge + ambient + intrinsic)


def preconditioned_gradient(problem: Problem, state: PrimalState) -> tuple[float, np.ndarray]:
    """Gradient divided by the block preconditioner P = diag(1, K).

    Returns (grad_b, I_E (f - y) + gamma_a alpha + gamma_i L K alpha); the
    bias block of P is the scalar 1, so grad_b is returned unchanged.
    """
    s = _fresh(problem, state)
    f = s.ka + s.b
    resid = np.where(s.error_mask, f - problem.y, 0.0)
    pgrad = resid + problem.gamma_a * s.alpha
    if problem.gamma_i > 0:
        pgrad = pgrad + problem.gamma_i * s.lka
    grad_b = float(resid.sum())
    return grad_b, pgrad


def gradient(problem: Problem, state: PrimalState) -> tuple[float, np.ndarray]:
    """Objective gradient (grad_b, grad_alpha); grad_alpha = K times the preconditioned block."""
    grad_b, pgrad = preconditioned_gradient(problem, state)
    return grad_b, problem.K @ pgrad


def hessian(problem: Problem, state: PrimalState) -> np.ndarray:
    """Generalized Hessian in (b, alpha) ordering, as a dense (n+1) x (n+1) matrix.

    Block form [[1' I_E 1, 1' I_E K], [K I_E 1, K I_E K + gamma_a K +
    gamma_i K L K]]. Dense by design (Newton-scale use only); the
    subdifferential at hinge breakpoints is taken as 0, i.e. margin-1 points
    contribute nothing.
    """
    s = _fresh(problem, state)
    n = problem.n
    e = s.error_mask
    k_e = problem.K[:, e]  # columns of K at error vectors
    h = np.empty((n + 1, n + 1))
    h[0, 0] = float(e.sum())
    row = k_e.sum(axis=1)
    h[0, 1:] = row
    h[1:, 0] = row
    block = k_e @ k_e.T + problem.gamma_a * problem.K
    if problem.gamma_i > 0:
        lk = problem.L @ problem.K
        block = block + problem.gamma_i * (problem.K @ lk)
    h[1:, 1:] = block
    return (h + h.T) / 2.0
