"""Line-search SQP driver for nonsmooth constrained problems.

One iteration: evaluate the oracles, build the relaxed QP at the current
penalty weight, solve it, test the stopping rule on (step norm, violation),
raise the penalty weight to clear the new multipliers, line-search the merit
function at the raised weight, step, and refresh the curvature matrix.

The trace records one entry per iteration, including the final one (which
takes no step: alpha = 0). theta on a record is the weight used by that
iteration's line search, so theta is non-decreasing along the trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    ContractError,
    DomainError,
    EvaluationError,
    LineSearchError,
    QpNumericalError,
    QpStallError,
)
from .globalization import LineSearchOutcome, line_search, update_penalty
from .problems import KktReport, ProblemSpec, constraint_violation, evaluate, kkt_residual
from .qpsolver import QpSolverSettings, solve_qp
from .subproblem import (
    ConstraintClassification,
    assemble,
    check_multiplier_bounds,
    classify,
)

#: statuses returned by solve()
CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
QP_STALL = "qp_stall"
LINE_SEARCH_FAILURE = "line_search_failure"
ORACLE_ERROR = "oracle_error"


@dataclass(frozen=True)
class FixedB:
    """Constant curvature matrix b * I."""

    b: float

    def __post_init__(self):
        if self.b <= 0:
            raise ContractError("fixed curvature weight must be positive")


@dataclass(frozen=True)
class TwoPhaseB:
    """b_early * I before switch_iter, b_late * I from switch_iter on."""

    b_early: float
    b_late: float
    switch_iter: int

    def __post_init__(self):
        if self.b_early <= 0 or self.b_late <= 0:
            raise ContractError("curvature weights must be positive")
        if self.switch_iter < 0:
            raise ContractError("switch_iter must be nonnegative")


BRule = Union[FixedB, TwoPhaseB]


def update_B(rule: BRule, k: int, n: int) -> np.ndarray:
    """Curvature matrix for iteration k under the given rule."""
    if isinstance(rule, FixedB):
        return rule.b * np.eye(n)
    if isinstance(rule, TwoPhaseB):
        b = rule.b_early if k < rule.switch_iter else rule.b_late
        return b * np.eye(n)
    raise ContractError(f"unknown curvature rule {rule!r}")


@dataclass(frozen=True)
class SolverConfig:
    """Driver parameters.

    Defaults follow the package-wide convention: sufficient-decrease
    coefficient eta = 0.1, backtracking factor tau_alpha = 0.5, penalty
    margin gamma = 1e-2, initial weight theta0 = 1, stopping tolerances
    eps = eps_c = 1e-8, iteration cap 500. qp_settings defaults to a
    1e-12 interior-point tolerance so terminal slacks sit well below the
    1e-10 band the tail diagnostics look at.
    """

    b_rule: BRule
    eta: float = 0.1
    tau_alpha: float = 0.5
    gamma: float = 1e-2
    theta0: float = 1.0
    eps: float = 1e-8
    eps_c: float = 1e-8
    max_iter: int = 500
    alpha_min: float = 1e-12
    qp_settings: QpSolverSettings = field(
        default_factory=lambda: QpSolverSettings(tolerance=1e-12)
    )
    monitors: frozenset = frozenset({"multiplier_bounds"})

    def __post_init__(self):
        if not (0.0 < self.eta < 1.0):
            raise ContractError("eta must lie in (0, 1)")
        if not (0.0 < self.tau_alpha < 1.0):
            raise ContractError("tau_alpha must lie in (0, 1)")
        if self.gamma <= 0 or self.theta0 <= 0:
            raise ContractError("gamma and theta0 must be positive")
        if self.eps <= 0 or self.eps_c <= 0:
            raise ContractError("eps and eps_c must be positive")
        if self.max_iter < 1:
            raise ContractError("max_iter must be positive")
        if self.alpha_min <= 0 or self.alpha_min >= 1:
            raise ContractError("alpha_min must lie in (0, 1)")


def default_config(spec: ProblemSpec, **overrides) -> SolverConfig:
    """Config with the fixed curvature rule b = 1.1 * max(1, rho).

    The fixed weight stays above the declared upper-C2 modulus, which the
    full-step behavior on affine problems relies on; construction asserts
    b > rho whenever rho is declared.
    """
    if "b_rule" not in overrides:
        rho = spec.rho if spec.rho is not None else 1.0
        overrides["b_rule"] = FixedB(1.1 * max(1.0, rho))
    rule = overrides["b_rule"]
    if isinstance(rule, FixedB) and spec.rho is not None and rule.b <= spec.rho:
        raise ContractError(
            f"fixed curvature weight {rule.b:g} must exceed declared rho {spec.rho:g}"
        )
    return SolverConfig(**overrides)


@dataclass(frozen=True)
class IterationRecord:
    """State of one iteration, taken before the step is applied.

    merit is f + theta * v at this iterate with this record's theta (the
    post-update weight used by the line search). b is the diagonal weight of
    the curvature matrix. slack_max is the largest elastic slack of the QP
    solution. alpha = 0 on the final converged record (no step taken).
    """

    k: int
    x: np.ndarray
    f: float
    v: float
    merit: float
    theta: float
    alpha: float
    step_norm: float
    lambda_inf: float
    b: float
    lam: np.ndarray
    slack_max: float
    classification: ConstraintClassification
    kkt: KktReport
    monitor_flags: dict


@dataclass(frozen=True)
class SolveResult:
    """status, final record (None when nothing completed), full trace."""

    status: str
    final: Optional[IterationRecord]
    trace: list

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def _record(k, x, f, v, merit_val, theta, alpha, d_norm, sol, b, cls, kkt, flags):
    return IterationRecord(
        k=k,
        x=x.copy(),
        f=f,
        v=v,
        merit=merit_val,
        theta=theta,
        alpha=alpha,
        step_norm=d_norm,
        lambda_inf=float(np.max(np.abs(sol.lam), initial=0.0)),
        b=b,
        lam=sol.lam.copy(),
        slack_max=sol.slack_max,
        classification=cls,
        kkt=kkt,
        monitor_flags=flags,
    )


def solve(spec: ProblemSpec, x0: np.ndarray, config: SolverConfig) -> SolveResult:
    """Run the SQP iteration from x0.

    Returns SolveResult with status "converged" when the step norm falls to
    eps with violation at most eps_c, "max_iterations" at the cap, and one
    of "qp_stall" / "line_search_failure" / "oracle_error" when the run
    aborts; aborted runs keep the partial trace.
    """
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    if x.shape != (spec.n,):
        raise ContractError(f"x0 must have shape ({spec.n},), got {x.shape}")
    theta = config.theta0
    trace: list = []

    for k in range(config.max_iter):
        try:
            f, g, c, _ = evaluate(spec, x)
        except (DomainError, EvaluationError):
            return SolveResult(ORACLE_ERROR, trace[-1] if trace else None, trace)
        v = constraint_violation(spec, c)
        B = update_B(config.b_rule, k, spec.n)
        b_diag = float(B[0, 0]) if spec.n else 0.0

        try:
            qp = assemble(spec, x, g, B, theta)
            sol = solve_qp(qp, config.qp_settings)
        except (QpStallError, QpNumericalError):
            return SolveResult(QP_STALL, trace[-1] if trace else None, trace)

        cls = classify(spec, qp, sol, tol=1e-8 * max(1.0, theta))
        kkt = kkt_residual(spec, x, sol.lam)
        flags = {}
        if "multiplier_bounds" in config.monitors:
            report = check_multiplier_bounds(qp, sol, cls)
            flags["multiplier_bounds_ok"] = report.ok

        d = sol.d
        d_norm = float(np.linalg.norm(d))
        if d_norm <= config.eps and v <= config.eps_c:
            final = _record(
                k, x, f, v, f + theta * v, theta, 0.0, d_norm, sol, b_diag, cls, kkt, flags
            )
            trace.append(final)
            return SolveResult(CONVERGED, final, trace)

        theta = update_penalty(theta, sol.lam, config.gamma)
        try:
            ls = line_search(
                spec, x, d, theta, B,
                eta=config.eta, tau_alpha=config.tau_alpha, alpha_min=config.alpha_min,
            )
        except LineSearchError:
            return SolveResult(LINE_SEARCH_FAILURE, trace[-1] if trace else None, trace)
        flags["line_search_trials"] = ls.trials

        trace.append(
            _record(
                k, x, f, v, f + theta * v, theta, ls.alpha, d_norm, sol, b_diag, cls, kkt, flags
            )
        )
        x = x + ls.alpha * d

    return SolveResult(MAX_ITERATIONS, trace[-1] if trace else None, trace)
