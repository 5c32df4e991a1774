"""Goal conditions for early-stopped conjugate gradient training.

Two families: data-driven heuristics that watch the classifier's decisions
(stability of predictions on the unlabeled points, error on a held-out
validation set, or their conjunction) and the classical norm thresholds
(gradient norm, preconditioned gradient norm, mixed product, relative
objective decrement), each normalized by its value at iteration 0.

All rules are evaluated every theta iterations against a mutable
StopContext owned by the driving solver. Defaults: eta = 1.5% for the
stability rule, eta = 100/|V|% (one example) for the validation rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STABILITY = "stability"
VALIDATION = "validation"
MIXED = "mixed"
GRAD_NORM = "gradnorm"
PGRAD_NORM = "pgradnorm"
MIXED_PRODUCT = "mixedproduct"
OBJECTIVE_DELTA = "objdelta"
NEVER = "never"

KINDS = (STABILITY, VALIDATION, MIXED, GRAD_NORM, PGRAD_NORM, MIXED_PRODUCT, OBJECTIVE_DELTA, NEVER)
_NORM_KINDS = (GRAD_NORM, PGRAD_NORM, MIXED_PRODUCT, OBJECTIVE_DELTA)


@dataclass(frozen=True)
class StopRule:
    """Selected goal condition and its thresholds.

    ``tau`` applies to the norm-based rules; ``eta_stability`` and
    ``eta_validation`` are percentages for the data-driven rules
    (eta_validation None means "resolve to 100/|V| when V is known").
    ``skip_first_validation_check`` suppresses the degenerate first
    validation check against the 100% initialization.
    """

    kind: str = NEVER
    tau: float = 1e-8
    eta_stability: float = 1.5
    eta_validation: float | None = None
    skip_first_validation_check: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown stop rule {self.kind!r}; expected one of {KINDS}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.eta_stability < 0:
            raise ValueError(f"eta_stability must be >= 0, got {self.eta_stability}")
        if self.eta_validation is not None and self.eta_validation < 0:
            raise ValueError(f"eta_validation must be >= 0, got {self.eta_validation}")

    @classmethod
    def stability(cls, eta: float = 1.5) -> "StopRule":
        return cls(kind=STABILITY, eta_stability=eta)

    @classmethod
    def validation(cls, eta: float | None = None, skip_first: bool = False) -> "StopRule":
        return cls(kind=VALIDATION, eta_validation=eta, skip_first_validation_check=skip_first)

    @classmethod
    def mixed(cls, eta_stability: float = 1.5, eta_validation: float | None = None) -> "StopRule":
        return cls(kind=MIXED, eta_stability=eta_stability, eta_validation=eta_validation)

    @classmethod
    def grad_norm(cls, tau: float) -> "StopRule":
        return cls(kind=GRAD_NORM, tau=tau)

    @classmethod
    def pgrad_norm(cls, tau: float) -> "StopRule":
        return cls(kind=PGRAD_NORM, tau=tau)

    @classmethod
    def mixed_product(cls, tau: float) -> "StopRule":
        return cls(kind=MIXED_PRODUCT, tau=tau)

    @classmethod
    def objective_delta(cls, tau: float) -> "StopRule":
        return cls(kind=OBJECTIVE_DELTA, tau=tau)

    @classmethod
    def never(cls) -> "StopRule":
        return cls(kind=NEVER)

    @property
    def needs_unlabeled(self) -> bool:
        return self.kind in (STABILITY, MIXED)

    @property
    def needs_validation(self) -> bool:
        return self.kind in (VALIDATION, MIXED)

    def resolved_eta_validation(self, v_size: int) -> float:
        if self.eta_validation is not None:
            return self.eta_validation
        if v_size <= 0:
            raise ValueError("validation rule requires a nonempty validation set")
        return 100.0 / v_size


@dataclass
class StopContext:
    """Per-solve mutable record the rules compare against.

    ``d_old`` starts as the zero vector (so the first stability check sees
    tau = 100 and never stops) and ``err_old`` starts at 100%.
    ``norms_at_start`` is (|grad|, |pgrad|, mixed product, objective) at
    iteration 0; ``prev_objective`` tracks the previous check's objective
    for the relative-decrement rule.
    """

    d_old: np.ndarray
    err_old: float = 100.0
    norms_at_start: tuple[float, float, float, float] = (np.nan, np.nan, np.nan, np.nan)
    prev_objective: float = np.nan
    checks_done: int = field(default=0)

    @classmethod
    def start(cls, u: int, norms_at_start: tuple[float, float, float, float]) -> "StopContext":
        return cls(
            d_old=np.zeros(u),
            norms_at_start=norms_at_start,
            prev_objective=norms_at_start[3],
        )


def stability_check(ctx: StopContext, current_decisions: np.ndarray, eta: float) -> bool:
    """Stop when the unlabeled decisions barely change between checks.

    tau = (100 * |d - d_old|_1 / u)%; each flipped +-1 decision contributes
    2 to the L1 norm. Stops iff tau < eta; otherwise d_old is replaced.
    """
    d = np.asarray(current_decisions, dtype=float)
    u = d.shape[0]
    if u == 0:
        raise ValueError("stability check requires unlabeled points")
    if d.shape != ctx.d_old.shape:
        raise ValueError(f"decision vector length {d.shape} != context length {ctx.d_old.shape}")
    tau = 100.0 * float(np.abs(d - ctx.d_old).sum()) / u
    if tau < eta:
        return True
    ctx.d_old = d.copy()
    return False


def validation_check(ctx: StopContext, err_v: float, eta: float) -> bool:
    """Stop when validation error fails to improve by at least eta since the last check."""
    if err_v > ctx.err_old - eta:
        return True
    ctx.err_old = float(err_v)
    return False


def mixed_check(
    ctx: StopContext,
    current_decisions: np.ndarray,
    err_v: float,
    eta_stability: float,
    eta_validation: float,
) -> bool:
    """Conjunction of the stability and validation rules ("most strict of the two").

    Both sub-conditions are evaluated against the current context, and both
    context fields are updated regardless of the individual verdicts.
    """
    d = np.asarray(current_decisions, dtype=float)
    u = d.shape[0]
    if u == 0:
        raise ValueError("mixed check requires unlabeled points")
    tau = 100.0 * float(np.abs(d - ctx.d_old).sum()) / u
    stab_stop = tau < eta_stability
    val_stop = err_v > ctx.err_old - eta_validation
    ctx.d_old = d.copy()
    ctx.err_old = float(err_v)
    return stab_stop and val_stop


def norm_rule_check(
    ctx: StopContext,
    current: tuple[float, float, float, float],
    rule: StopRule,
) -> bool:
    """Classical conditions on (|grad|, |pgrad|, mixed product, obj), normalized at start.

    Stops iff the selected normalized quantity falls strictly below tau. The
    objective rule uses the relative decrement |obj_t - obj_prev| / |obj_0|.
    """
    if rule.kind not in _NORM_KINDS:
        raise ValueError(f"not a norm-based rule: {rule.kind!r}")
    g, pg, mix, obj = current
    g0, pg0, mix0, obj0 = ctx.norms_at_start
    if rule.kind == OBJECTIVE_DELTA:
        if obj0 == 0:
            return True
        value = abs(obj - ctx.prev_objective) / abs(obj0)
        ctx.prev_objective = float(obj)
        return value < rule.tau
    ref = {GRAD_NORM: (g, g0), PGRAD_NORM: (pg, pg0), MIXED_PRODUCT: (mix, mix0)}[rule.kind]
    cur, start = ref
    if start == 0:
        return True
    return cur / start < rule.tau


def evaluate(
    rule: StopRule,
    ctx: StopContext,
    *,
    decisions: np.ndarray | None = None,
    validation_error: float | None = None,
    norms: tuple[float, float, float, float] | None = None,
) -> bool:
    """Dispatch one check of ``rule``; the solver calls this every theta iterations.

    Rules that look at the validation set must have eta_validation resolved
    (see :meth:`StopRule.resolved_eta_validation`) before the solve starts.
    """
    ctx.checks_done += 1
    if rule.kind == NEVER:
        return False
    if rule.kind == STABILITY:
        return stability_check(ctx, decisions, rule.eta_stability)
    if rule.kind in (VALIDATION, MIXED) and rule.eta_validation is None:
        raise ValueError("eta_validation unresolved; bind it to 100/|V| before solving")
    if rule.kind == VALIDATION:
        if rule.skip_first_validation_check and ctx.checks_done == 1:
            ctx.err_old = float(validation_error)
            return False
        return validation_check(ctx, validation_error, rule.eta_validation)
    if rule.kind == MIXED:
        return mixed_check(ctx, decisions, validation_error, rule.eta_stability, rule.eta_validation)
    return norm_rule_check(ctx, norms, rule)
