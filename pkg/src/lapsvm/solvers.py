"""Newton's method and preconditioned conjugate gradient for the primal problem.

Newton exploits the piecewise-quadratic structure: each step solves the
dense system

    [[0, 1'], [I_E 1, I_E K + gamma_a I + gamma_i L K]] z = [0; I_E y]

for the current error set E and blends it with the previous iterate through
the step size s (default 1); convergence is declared when E stops changing
between consecutive iterations.

PCG never forms a matrix-matrix product. Directions follow the
Polak-Ribiere update on the preconditioned gradient (preconditioner
P = diag(1, K)), with the update coefficient clamped at 0 so a negative
numerator restarts the descent from the steepest direction. Every step uses
the exact analytic line search: the directional derivative psi(s) of the
objective is piecewise linear with breakpoints where labeled points enter
or leave E, so the minimizer is found by walking the sorted breakpoints and
updating psi(0)/psi(1) in O(1) per interval.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from lapsvm.core import (
    PrimalState,
    Problem,
    objective,
    preconditioned_gradient,
    refresh_error_set,
)
from lapsvm import stopping
from lapsvm.stopping import StopContext, StopRule


class NumericalError(RuntimeError):
    """Raised when a solve fails numerically (singular system, divergence)."""


class StopReason(str, enum.Enum):
    ERROR_SET_STABLE = "error_set_stable"
    STABILITY_CHECK = "stability_check"
    VALIDATION_CHECK = "validation_check"
    MIXED_CHECK = "mixed_check"
    GRAD_NORM_THRESHOLD = "grad_norm_threshold"
    MAX_ITERS = "max_iters"


_RULE_REASON = {
    stopping.STABILITY: StopReason.STABILITY_CHECK,
    stopping.VALIDATION: StopReason.VALIDATION_CHECK,
    stopping.MIXED: StopReason.MIXED_CHECK,
    stopping.GRAD_NORM: StopReason.GRAD_NORM_THRESHOLD,
    stopping.PGRAD_NORM: StopReason.GRAD_NORM_THRESHOLD,
    stopping.MIXED_PRODUCT: StopReason.GRAD_NORM_THRESHOLD,
    stopping.OBJECTIVE_DELTA: StopReason.GRAD_NORM_THRESHOLD,
}


@dataclass(frozen=True)
class NewtonConfig:
    """Newton iteration parameters; error-set stability is always the convergence test."""

    step_size: float = 1.0
    max_steps: int = 50
    backtracking: bool = False  # optional Armijo guard; default is the plain s-step
    record_traces: bool = True

    def __post_init__(self):
        if not 0 < self.step_size <= 1:
            raise ValueError(f"step_size must lie in (0, 1], got {self.step_size}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass(frozen=True)
class PcgConfig:
    """PCG parameters: iteration budget, check cadence, goal condition, warm start.

    ``max_iters`` defaults to n and ``check_gap`` to ceil(sqrt(n)/2) at solve
    time. ``validation_gram``/``validation_labels`` supply the held-out set
    for the validation and mixed rules. ``record_traces`` can be switched off
    so benchmark timings are not polluted by bookkeeping.
    ``preconditioner`` accepts "identity" for testing against classical CG.
    """

    max_iters: int | None = None
    check_gap: int | None = None
    stop_rule: StopRule = field(default_factory=StopRule.never)
    warm_start: PrimalState | None = None
    validation_gram: np.ndarray | None = None
    validation_labels: np.ndarray | None = None
    record_traces: bool = True
    preconditioner: str = "kernel"

    def __post_init__(self):
        if self.max_iters is not None and self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.check_gap is not None and self.check_gap < 1:
            raise ValueError(f"check_gap must be >= 1, got {self.check_gap}")
        if self.preconditioner not in ("kernel", "identity"):
            raise ValueError(f"preconditioner must be 'kernel' or 'identity', got {self.preconditioner!r}")


@dataclass
class SolveReport:
    """Outcome of a solve: final state, counters, per-iteration traces."""

    final_state: PrimalState
    iterations: int
    line_search_iters_total: int
    objective_trace: list[float]
    grad_norm_trace: list[float]
    pgrad_norm_trace: list[float]
    mixed_product_trace: list[float]
    stop_reason: StopReason


def default_check_gap(n: int) -> int:
    """Check cadence theta = ceil(sqrt(n) / 2)."""
    return max(1, math.ceil(math.sqrt(n) / 2.0))


def _norms(problem: Problem, grad_b: float, pgrad: np.ndarray, grad_alpha: np.ndarray):
    g = math.sqrt(float(grad_alpha @ grad_alpha) + grad_b * grad_b)
    pg = math.sqrt(float(pgrad @ pgrad) + grad_b * grad_b)
    mix = math.sqrt(max(float(pgrad @ grad_alpha), 0.0) + grad_b * grad_b)
    return g, pg, mix


# ---------------------------------------------------------------------------
# Newton's method
# ---------------------------------------------------------------------------


def _newton_system(problem: Problem, error_mask: np.ndarray):
    n = problem.n
    mask = error_mask.astype(float)
    m = problem.K * mask[:, None]  # I_E K
    m[np.diag_indices(n)] += problem.gamma_a
    if problem.gamma_i > 0:
        m += problem.gamma_i * (problem.L @ problem.K)
    b = np.zeros((n + 1, n + 1))
    b[0, 1:] = 1.0
    b[1:, 0] = mask
    b[1:, 1:] = m
    rhs = np.zeros(n + 1)
    rhs[1:] = np.where(error_mask, problem.y, 0.0)
    return b, rhs


def _solve_dense(system: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        sol = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "singular Newton system; add a small kernel ridge (e.g. 1e-6 * mean diagonal)"
        ) from exc
    if not np.isfinite(sol).all():
        raise NumericalError("Newton solve produced non-finite values; consider adding a kernel ridge")
    return sol


def newton_solve(
    problem: Problem,
    config: NewtonConfig | None = None,
    init: PrimalState | None = None,
) -> SolveReport:
    """Iterate the blended Newton update until the error set stabilizes.

    With step size 1 the previous iterate drops out entirely and each step is
    fully determined by E, so two consecutive steps with identical E produce
    identical states and the iteration has converged.
    """
    cfg = config or NewtonConfig()
    state = init.copy() if init is not None else PrimalState.zero(problem)
    refresh_error_set(problem, state)

    traces = ([], [], [], [])
    ls_total = 0

    def record():
        if not cfg.record_traces:
            return
        gb, pg = preconditioned_gradient(problem, state)
        ga = problem.K @ pg
        g, p, mix = _norms(problem, gb, pg, ga)
        traces[0].append(objective(problem, state))
        traces[1].append(g)
        traces[2].append(p)
        traces[3].append(mix)

    record()
    stop_reason = StopReason.MAX_ITERS
    iterations = 0
    for _ in range(cfg.max_steps):
        prev_mask = state.error_mask.copy()
        system, rhs = _newton_system(problem, prev_mask)
        z_new = _solve_dense(system, rhs)
        iterations += 1
        if cfg.backtracking:
            db = z_new[0] - state.b
            da = z_new[1:] - state.alpha
            step = _armijo_step(problem, state, db, da)
            state.b += step * db
            state.alpha = state.alpha + step * da
            ls_total += 1
        else:
            s = cfg.step_size
            state.b = (1.0 - s) * state.b + s * z_new[0]
            state.alpha = (1.0 - s) * state.alpha + s * z_new[1:]
        refresh_error_set(problem, state)
        record()
        if np.array_equal(state.error_mask, prev_mask):
            stop_reason = StopReason.ERROR_SET_STABLE
            break

    return SolveReport(
        final_state=state,
        iterations=iterations,
        line_search_iters_total=ls_total,
        objective_trace=traces[0],
        grad_norm_trace=traces[1],
        pgrad_norm_trace=traces[2],
        mixed_product_trace=traces[3],
        stop_reason=stop_reason,
    )


def _armijo_step(problem, state, db, da, shrink=0.5, c=1e-4, max_halvings=40):
    gb, pg = preconditioned_gradient(problem, state)
    slope = gb * db + float((problem.K @ pg) @ da)
    base = objective(problem, state)
    step = 1.0
    for _ in range(max_halvings):
        trial = PrimalState(alpha=state.alpha + step * da, b=state.b + step * db)
        if objective(problem, trial) <= base + c * step * slope:
            return step
        step *= shrink
    return step


def frozen_error_set_solve(problem: Problem, residual_tol: float = 1e-8) -> PrimalState:
    """One Newton-type solve with E frozen to all labeled points.

    This is the squared-loss (LapRLSC) solution: the L2 hinge with every
    labeled point kept in the error set. Raises if the computed solution
    does not satisfy the stationarity system to ``residual_tol``.
    """
    mask = problem.labeled_mask()
    system, rhs = _newton_system(problem, mask)
    z = _solve_dense(system, rhs)
    residual = float(np.linalg.norm(system @ z - rhs))
    if residual > residual_tol * max(1.0, float(np.linalg.norm(rhs))):
        raise NumericalError(
            f"frozen-error-set solve residual {residual:.3e} exceeds tolerance; "
            "add a small kernel ridge"
        )
    state = PrimalState(alpha=z[1:], b=float(z[0]))
    return refresh_error_set(problem, state)


# ---------------------------------------------------------------------------
# Exact line search
# ---------------------------------------------------------------------------


def line_search(problem: Problem, state: PrimalState, d_b: float, d_alpha: np.ndarray):
    """Exact minimizer of obj(z + s d) over s >= 0 along a descent direction.

    Returns (s_star, intervals_visited). Returns s_star = 0 when d is not a
    descent direction; raises on an all-zero direction.
    """
    d_alpha = np.asarray(d_alpha, dtype=float)
    if d_b == 0.0 and not d_alpha.any():
        raise ValueError("line search direction is identically zero")
    state = refresh_error_set(problem, state) if not state.fresh else state
    kd = problem.K @ d_alpha
    lkd = problem.L @ kd if problem.gamma_i > 0 else None
    return _line_search_cached(problem, state, d_b, d_alpha, kd, lkd)


def _line_search_cached(problem, state, d_b, d_alpha, kd, lkd):
    l = problem.l
    y = problem.y[:l]
    f = (state.ka + state.b)[:l]
    fd = kd[:l] + d_b

    # smooth (regularizer) part of psi(s) = psi0 + s * slope
    psi0 = problem.gamma_a * float(state.alpha @ kd)
    slope = problem.gamma_a * float(d_alpha @ kd)
    if problem.gamma_i > 0:
        psi0 += problem.gamma_i * float(state.ka @ lkd)
        slope += problem.gamma_i * float(kd @ lkd)

    # membership just right of s = 0: margin-1 points pushed inward count as errors
    margin = y * f
    margin_rate = y * fd
    in_e = (margin < 1.0) | ((margin == 1.0) & (margin_rate < 0.0))

    psi0 += float(((f - y) * fd)[in_e].sum())
    slope += float((fd[in_e] ** 2).sum())

    # breakpoints: s_i = (y_i - f_i) / fd_i switches point i's error status
    with np.errstate(divide="ignore", invalid="ignore"):
        bp = np.where(fd != 0.0, (y - f) / fd, np.inf)
    candidates = np.flatnonzero((bp > 0.0) & np.isfinite(bp))
    order = candidates[np.lexsort((candidates, bp[candidates]))]

    lo = 0.0
    visited = 0
    for idx in list(order) + [None]:
        visited += 1
        hi = np.inf if idx is None else float(bp[idx])
        if psi0 + lo * slope >= 0.0:
            # derivative nonnegative at the interval start: the minimizer is lo
            # (lo = 0 on the first interval means d was not a descent direction)
            return lo, visited
        if slope > 0.0:
            psi1 = psi0 + slope
            s = psi0 / (psi0 - psi1)  # zero crossing of the current linear piece
            if s <= hi:  # s > lo is automatic when psi(lo) < 0 and slope > 0
                return float(s), visited
        if idx is None:
            raise NumericalError("line search found an unbounded descent ray")
        # cross the breakpoint: flip point idx in or out of the error set
        nu = -1.0 if in_e[idx] else 1.0
        in_e[idx] = not in_e[idx]
        psi0 += nu * (f[idx] - y[idx]) * fd[idx]
        slope += nu * fd[idx] ** 2
        lo = hi

    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Preconditioned conjugate gradient
# ---------------------------------------------------------------------------


def pcg_solve(
    problem: Problem,
    config: PcgConfig | None = None,
    init: PrimalState | None = None,
    callback=None,
) -> SolveReport:
    """Train by preconditioned conjugate gradient with exact line search.

    The descent direction is d_t = -pgrad_t + rho d_{t-1} with the
    Polak-Ribiere coefficient computed through P-weighted products
    (pgrad' P pgrad = pgrad_b^2 + pgrad_alpha' K pgrad_alpha); a clamped
    rho restarts from steepest descent. The stop rule is evaluated every
    ``check_gap`` iterations. ``callback(t, info)`` is invoked at t = 0 and
    after every iteration with a dict holding alpha, b, f and the traces.
    """
    cfg = config or PcgConfig()
    n = problem.n
    max_iters = cfg.max_iters if cfg.max_iters is not None else n
    gap = cfg.check_gap if cfg.check_gap is not None else default_check_gap(n)
    rule = cfg.stop_rule
    identity_p = cfg.preconditioner == "identity"

    if rule.needs_unlabeled and problem.u == 0:
        raise ValueError(f"stop rule {rule.kind!r} requires unlabeled training points")
    if rule.needs_validation:
        if cfg.validation_gram is None or cfg.validation_labels is None:
            raise ValueError(f"stop rule {rule.kind!r} requires validation data in PcgConfig")
        if rule.eta_validation is None:
            rule = dataclasses.replace(
                rule, eta_validation=rule.resolved_eta_validation(len(cfg.validation_labels))
            )

    state = cfg.warm_start.copy() if cfg.warm_start is not None else None
    if init is not None:
        state = init.copy()
    if state is None:
        state = PrimalState.zero(problem)
    refresh_error_set(problem, state)

    alpha = state.alpha
    b = state.b
    ka = state.ka
    lka = state.lka
    mask = state.error_mask
    y = problem.y

    def raw_pgrad():
        f = ka + b
        resid = np.where(mask, f - y, 0.0)
        pg = resid + problem.gamma_a * alpha
        if problem.gamma_i > 0:
            pg = pg + problem.gamma_i * lka
        return float(resid.sum()), pg

    def compute_objective():
        f = ka + b
        hinge = float(np.sum((1.0 - y[mask] * f[mask]) ** 2))
        obj = hinge + problem.gamma_a * float(alpha @ ka)
        if problem.gamma_i > 0:
            obj += problem.gamma_i * float(ka @ lka)
        return 0.5 * obj

    pg_b, pg_raw = raw_pgrad()
    g_true = problem.K @ pg_raw
    pg_vec = g_true if identity_p else pg_raw  # direction-generating gradient
    pw_vec = g_true  # P @ pg_vec: K pg for the kernel preconditioner, pg itself for identity

    gnorm, pgnorm, mix = _norms(problem, pg_b, pg_raw, g_true)
    obj = compute_objective()
    ctx = StopContext.start(problem.u, (gnorm, pgnorm, mix, obj))

    traces = ([obj], [gnorm], [pgnorm], [mix]) if cfg.record_traces else ([], [], [], [])

    def notify(t, rho=None):
        if callback is not None:
            callback(
                t,
                {
                    "alpha": alpha.copy(),
                    "b": b,
                    "f": ka + b,
                    "objective": obj,
                    "grad_norm": gnorm,
                    "pgrad_norm": pgnorm,
                    "mixed_product": mix,
                    "rho": rho,  # PR coefficient of the direction leaving this iteration
                    "is_check": t > 0 and t % gap == 0,
                },
            )

    notify(0)

    def finish(t, reason):
        final = PrimalState(alpha=alpha, b=b, ka=ka, lka=lka, error_mask=mask, fresh=True)
        return SolveReport(
            final_state=final,
            iterations=t,
            line_search_iters_total=ls_total,
            objective_trace=traces[0],
            grad_norm_trace=traces[1],
            pgrad_norm_trace=traces[2],
            mixed_product_trace=traces[3],
            stop_reason=reason,
        )

    ls_total = 0
    if gnorm == 0.0:
        return finish(0, StopReason.GRAD_NORM_THRESHOLD)

    d_b = -pg_b
    d_alpha = -pg_vec
    kd = -(problem.K @ g_true) if identity_p else -g_true

    t = 0
    while t < max_iters:
        t += 1
        lkd = problem.L @ kd if problem.gamma_i > 0 else None
        work = PrimalState(alpha=alpha, b=b, ka=ka, lka=lka, error_mask=mask, fresh=True)
        s_star, ls_it = _line_search_cached(problem, work, d_b, d_alpha, kd, lkd)
        ls_total += ls_it
        if s_star <= 0.0:
            return finish(t - 1, StopReason.GRAD_NORM_THRESHOLD)

        alpha = alpha + s_star * d_alpha
        b = b + s_star * d_b
        ka = ka + s_star * kd
        if problem.gamma_i > 0:
            lka = lka + s_star * lkd
        f = ka + b
        mask = np.zeros(n, dtype=bool)
        mask[: problem.l] = y[: problem.l] * f[: problem.l] < 1.0

        pg_b_new, pg_raw = raw_pgrad()
        g_true = problem.K @ pg_raw
        pg_vec_new = g_true if identity_p else pg_raw
        pw_vec_new = g_true

        gnorm, pgnorm, mix = _norms(problem, pg_b_new, pg_raw, g_true)
        if not math.isfinite(gnorm):
            raise NumericalError("PCG diverged (non-finite gradient); check ridge and parameters")
        need_obj = cfg.record_traces or rule.kind == stopping.OBJECTIVE_DELTA or callback is not None
        if need_obj:
            obj = compute_objective()
            if not math.isfinite(obj):
                raise NumericalError("PCG diverged (non-finite objective); check ridge and parameters")
        if cfg.record_traces:
            traces[0].append(obj)
            traces[1].append(gnorm)
            traces[2].append(pgnorm)
            traces[3].append(mix)

        denom = pg_b * pg_b + float(pw_vec @ pg_vec)
        if denom <= 0.0:
            rho = 0.0
        else:
            num = pg_b_new * (pg_b_new - pg_b) + float(pw_vec_new @ (pg_vec_new - pg_vec))
            rho = max(num / denom, 0.0)
        d_alpha = -pg_vec_new + rho * d_alpha
        d_b = -pg_b_new + rho * d_b
        kd_grad = problem.K @ pw_vec_new if identity_p else g_true
        kd = -kd_grad + rho * kd

        pg_b, pg_vec, pw_vec = pg_b_new, pg_vec_new, pw_vec_new
        notify(t, rho)

        if t % gap == 0 and rule.kind != stopping.NEVER:
            decisions = None
            err_v = None
            if rule.needs_unlabeled:
                fu = f[problem.l :]
                decisions = np.where(fu >= 0.0, 1.0, -1.0)
            if rule.needs_validation:
                fv = cfg.validation_gram @ alpha + b
                pred = np.where(fv >= 0.0, 1.0, -1.0)
                err_v = 100.0 * float(np.mean(pred != cfg.validation_labels))
            if stopping.evaluate(
                rule, ctx, decisions=decisions, validation_error=err_v, norms=(gnorm, pgnorm, mix, obj)
            ):
                return finish(t, _RULE_REASON[rule.kind])

    return finish(t, StopReason.MAX_ITERS)
