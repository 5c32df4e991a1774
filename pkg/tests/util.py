"""Shared builders for randomized test problems."""

import numpy as np

from lapsvm.core import PrimalState, Problem, refresh_error_set
from lapsvm.graph import GraphSpec, knn_adjacency, laplacian
from lapsvm.kernels import KernelSpec, gram


def random_problem(rng, n=24, l=10, gamma_a=0.5, gamma_i=0.5, dim=3, nn=4, ridge=1e-6):
    """Small well-conditioned problem with an RBF kernel and a kNN Laplacian."""
    pts = rng.standard_normal((n, dim))
    spec = KernelSpec(kind="gaussian", sigma=1.5)
    k = gram(spec, pts, ridge=ridge)
    lap = None
    if gamma_i > 0:
        gs = GraphSpec(nn=min(nn, n - 1))
        lap = laplacian(knn_adjacency(pts, gs), gs)
    y = np.zeros(n)
    y[:l] = rng.choice([-1.0, 1.0], size=l)
    if np.all(y[:l] == y[0]):  # keep both classes present
        y[0] = -y[0]
    return Problem(K=k.values, L=lap, y=y, l=l, gamma_a=gamma_a, gamma_i=gamma_i)


def random_state(rng, problem, scale=0.5, margin_guard=0.0, max_tries=200):
    """Random primal state; optionally resampled until no margin is within
    ``margin_guard`` of the hinge breakpoint (needed by finite-difference tests)."""
    for _ in range(max_tries):
        state = PrimalState(
            alpha=scale * rng.standard_normal(problem.n),
            b=scale * float(rng.standard_normal()),
        )
        refresh_error_set(problem, state)
        if margin_guard == 0.0:
            return state
        f = state.decision_values()[: problem.l]
        margins = problem.y[: problem.l] * f
        if np.all(np.abs(margins - 1.0) > margin_guard):
            return state
    raise AssertionError("could not sample a state away from hinge breakpoints")


def z_vector(state):
    return np.concatenate([[state.b], state.alpha])
