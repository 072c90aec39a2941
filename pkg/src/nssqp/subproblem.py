"""Relaxed QP subproblem: assembly, classification, multiplier bounds.

At an iterate x with subgradient g, curvature matrix B and penalty weight
theta, the direction-finding subproblem is the always-feasible relaxation

    minimize    (1/2) d'Bd + g'd + theta * (sum_E (v_i + w_i) + sum_I t_i)
    subject to  c_i + <grad c_i, d> = v_i - w_i          (i in E)
                c_i + <grad c_i, d> >= -t_i              (i in I)
                v, w, t >= 0.

Rows whose slack vanishes behave like ordinary linearized constraints
("consistent"); rows that keep positive slack are locally irreconcilable at
this penalty level and pin their multiplier to theta times the residual sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, ContractError
from .problems import ProblemSpec

#: multipliers within this fraction of theta of their bound are still "ok"
_DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class QpData:
    """Data of one relaxed subproblem instance.

    Holds plain arrays only (no oracle references). b_lower is the smallest
    eigenvalue of B, recorded at assembly so downstream checks can reuse it.
    """

    B: np.ndarray
    g: np.ndarray
    c: np.ndarray
    J: np.ndarray
    theta: float
    eq_count: int
    ineq_count: int
    b_lower: float

    @property
    def n(self) -> int:
        return self.g.shape[0]


@dataclass(frozen=True)
class QpSolution:
    """Primal-dual solution of a relaxed subproblem.

    lam follows the row ordering of QpData (equalities first). p, q are the
    multipliers of the v, w >= 0 bounds on equality rows; r of t >= 0 on
    inequality rows; all recovered analytically from lam and theta.
    qp_objective excludes the (constant) current objective value and the
    tiny slack regularization.
    """

    d: np.ndarray
    v: np.ndarray
    w: np.ndarray
    t: np.ndarray
    lam: np.ndarray
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray
    qp_objective: float
    solve_status: str
    iterations: int

    @property
    def slack_max(self) -> float:
        parts = [s.max(initial=0.0) for s in (self.v, self.w, self.t)]
        return float(max(parts))


@dataclass(frozen=True)
class ConstraintClassification:
    """Consistent/violated split of rows at a QP solution.

    consistent and violated partition range(m). signs holds, for every row,
    the sign of the linearized residual c_i + <grad c_i, d> under a dead-band
    tolerance (0 in the band); equality rows are consistent exactly when
    their sign is 0.
    """

    consistent: tuple
    violated: tuple
    signs: np.ndarray
    tol: float


@dataclass(frozen=True)
class MultiplierBoundReport:
    """Outcome of checking the penalty bounds on QP multipliers."""

    ok: bool
    violations: tuple
    tol: float


def assemble(
    spec: ProblemSpec,
    x: np.ndarray,
    g: np.ndarray,
    B: np.ndarray,
    theta: float,
) -> QpData:
    """Build QpData for the relaxed subproblem at x.

    B must be symmetric positive definite (symmetry tolerance 1e-12) and
    theta positive; any non-finite entry raises AssemblyError.
    """
    from .problems import evaluate

    g = np.asarray(g, dtype=float).reshape(-1)
    B = np.asarray(B, dtype=float)
    if g.shape != (spec.n,) or B.shape != (spec.n, spec.n):
        raise AssemblyError(f"bad shapes g{g.shape}, B{B.shape} for n={spec.n}")
    if not np.all(np.isfinite(B)) or not np.all(np.isfinite(g)):
        raise AssemblyError("non-finite entries in B or g")
    if np.max(np.abs(B - B.T), initial=0.0) > 1e-12:
        raise AssemblyError("B is not symmetric within 1e-12")
    b_lower = float(np.linalg.eigvalsh(B)[0])
    if b_lower <= 0.0:
        raise AssemblyError(f"B is not positive definite (min eigenvalue {b_lower:g})")
    theta = float(theta)
    if not np.isfinite(theta) or theta <= 0.0:
        raise AssemblyError(f"theta must be positive and finite, got {theta!r}")

    _, _, c, J = evaluate(spec, x)
    return QpData(
        B=B.copy(),
        g=g.copy(),
        c=c.copy(),
        J=J.copy(),
        theta=theta,
        eq_count=spec.eq_count,
        ineq_count=spec.ineq_count,
        b_lower=b_lower,
    )


def recover_slack_multipliers(lam: np.ndarray, theta: float, eq_count: int):
    """Bound multipliers implied by stationarity in the slack variables.

    For equality rows p_i = theta + lambda_i and q_i = theta - lambda_i; for
    inequality rows r_i = theta - lambda_i. All are nonnegative whenever
    |lambda_i| <= theta on equalities and lambda_i <= theta on inequalities.

    Returns (p, q, r) with shapes (me,), (me,), (mi,).
    """
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if eq_count < 0 or eq_count > lam.shape[0]:
        raise ContractError(f"eq_count {eq_count} out of range for {lam.shape[0]} rows")
    lam_eq, lam_in = lam[:eq_count], lam[eq_count:]
    p = theta + lam_eq
    q = theta - lam_eq
    r = theta - lam_in
    return p, q, r


def classify(
    spec: ProblemSpec,
    qp: QpData,
    sol: QpSolution,
    tol: float = _DEFAULT_TOL,
) -> ConstraintClassification:
    """Split rows into consistent and violated sets at a QP solution.

    An equality row is consistent when max(v_i, w_i) <= tol, an inequality
    row when t_i <= tol. signs applies a dead-band of width tol to the
    linearized residual c_i + <grad c_i, d>.
    """
    if tol <= 0.0:
        raise ContractError("tol must be positive")
    me, mi = qp.eq_count, qp.ineq_count
    resid = qp.c + qp.J @ sol.d if (me + mi) else np.zeros(0)
    signs = np.where(resid > tol, 1, np.where(resid < -tol, -1, 0)).astype(int)

    consistent, violated = [], []
    for i in range(me):
        if max(sol.v[i], sol.w[i]) <= tol:
            consistent.append(i)
        else:
            violated.append(i)
    for j in range(mi):
        if sol.t[j] <= tol:
            consistent.append(me + j)
        else:
            violated.append(me + j)
    return ConstraintClassification(
        consistent=tuple(consistent),
        violated=tuple(violated),
        signs=signs,
        tol=float(tol),
    )


def check_multiplier_bounds(
    qp: QpData,
    sol: QpSolution,
    cls: ConstraintClassification,
    tol: float = _DEFAULT_TOL,
) -> MultiplierBoundReport:
    """Check the penalty-implied multiplier bounds row by row.

    Violated equality rows must satisfy lambda_i = -sign_i * theta; consistent
    equality rows |lambda_i| <= theta. Violated inequality rows must satisfy
    lambda_i = theta; consistent inequality rows 0 <= lambda_i <= theta. All
    comparisons carry the given tolerance.
    """
    theta, me = qp.theta, qp.eq_count
    violated = set(cls.violated)
    problems = []
    for i in range(me):
        lam_i = sol.lam[i]
        if i in violated:
            gap = abs(lam_i + cls.signs[i] * theta)
            if gap > tol:
                problems.append((i, "violated equality row multiplier off -sign*theta", gap))
        else:
            gap = abs(lam_i) - theta
            if gap > tol:
                problems.append((i, "consistent equality row multiplier beyond theta", gap))
    for j in range(me, me + qp.ineq_count):
        lam_j = sol.lam[j]
        if j in violated:
            gap = abs(lam_j - theta)
            if gap > tol:
                problems.append((j, "violated inequality row multiplier off theta", gap))
        else:
            low_gap = -lam_j
            high_gap = lam_j - theta
            gap = max(low_gap, high_gap)
            if gap > tol:
                problems.append((j, "consistent inequality row multiplier outside [0, theta]", gap))
    return MultiplierBoundReport(ok=not problems, violations=tuple(problems), tol=float(tol))
