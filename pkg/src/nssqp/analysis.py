"""Trace diagnostics: potential function, descent monitors, rates, MFCQ.

The potential couples each iterate to its predecessor through the convex
conjugate of the sigma-moderated objective F(x) = (sigma/2)||x||^2 - f(x)
plus a proximal term. Its per-step descent, the boundedness of a constructed
subgradient element, and an R-linear fit of the error sequence are the
checkable consequences of the convergence theory on a recorded run.

Conjugate values come from a coarse grid plus local refinement (F is convex
for sigma above the objective's curvature modulus, so the coarse argmax
localizes the true one); the refined spacing keeps the value error within
GRID_ERROR_BUDGET, and every potential-based tolerance derives from that
budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    CapabilityError,
    ContractError,
    InsufficientDataError,
    PremiseError,
)
from .problems import ProblemSpec, constraint_hessians, constraint_violation
from .qpsolver import QpSolverSettings, solve_qp
from .subproblem import QpData

#: everything derived from grid conjugates is trusted to this accuracy
GRID_ERROR_BUDGET = 1e-4

_FINE_SPACING = 1e-5
_REFINE_POINTS = 201
_LINEARIZED_TOL = 1e-8
_MFCQ_SLACK_TOL = 1e-6
_MFCQ_THETA = 1e3


@dataclass(frozen=True)
class PotentialParams:
    """Parameters of the coupling potential.

    sigma moderates the objective (must exceed the problem's curvature
    modulus rho so F is convex with modulus sigma - rho); ell weights the
    proximal term; box overrides the problem box as the conjugate's search
    domain; c_b is the fraction of b that the penalty-curvature product may
    occupy in the nonlinear-constraint premises.
    """

    sigma: float
    ell: float
    box: Optional[np.ndarray] = None
    grid_points_per_dim: int = 1000
    c_b: float = 0.5

    def __post_init__(self):
        if not np.isfinite(self.sigma):
            raise ContractError(f"sigma must be finite, got {self.sigma}")
        if not np.isfinite(self.ell) or self.ell <= 0.0:
            raise ContractError(f"ell must be positive, got {self.ell}")
        if not 0.0 < self.c_b < 1.0:
            raise ContractError(f"c_b must lie in (0, 1), got {self.c_b}")
        if self.grid_points_per_dim < 2:
            raise ContractError("grid_points_per_dim must be at least 2")
        if self.box is not None:
            box = np.asarray(self.box, dtype=float)
            if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 0] >= box[:, 1]):
                raise ContractError("box must be (n, 2) with lower < upper rows")


def default_potential_params(spec: ProblemSpec, b: float, theta_bar=None) -> PotentialParams:
    """Premise-satisfying defaults for a problem and curvature weight b.

    sigma = rho + 1 and ell = min(2b - sigma, b), which meets 2b >= sigma +
    ell and b >= sigma whenever b >= rho + 1. With nonlinearly-curved
    constraints the run's final penalty is also needed to place c_b so that
    c_b * b covers theta_bar * lip_h while ell stays above c_b * b.
    """
    if spec.rho is None:
        raise PremiseError("potential defaults need a declared curvature modulus rho")
    sigma = spec.rho + 1.0
    ell = min(2.0 * b - sigma, b)
    if ell <= 0.0:
        raise PremiseError(
            f"no positive ell satisfies 2b >= sigma + ell with b={b}, sigma={sigma}"
        )
    if spec.lip_h is None or spec.lip_h > 0.0:
        if theta_bar is None:
            raise PremiseError(
                "nonlinearly-curved constraints need theta_bar (the run's final"
                " penalty) to place c_b"
            )
        if spec.lip_h is None:
            raise PremiseError("constraint curvature bound lip_h is undeclared")
        lower = theta_bar * spec.lip_h / b
        upper = min(ell / b, 1.0)
        if lower >= upper:
            raise PremiseError(
                f"cannot place c_b: need theta_bar*lip_h/b = {lower:.3g} below"
                f" min(ell/b, 1) = {upper:.3g}"
            )
        c_b = 0.5 * (max(lower, 0.0) + upper)
        return PotentialParams(sigma=sigma, ell=ell, c_b=c_b)
    return PotentialParams(sigma=sigma, ell=ell)


def _objective_on(spec, X):
    if spec.objective_batch is not None:
        return np.asarray(spec.objective_batch(X), dtype=float)
    return np.array([float(spec.objective_oracle(x)[0]) for x in X])


def _conjugate_box(spec, params):
    box = params.box if params.box is not None else spec.box
    if box is None:
        raise ContractError("conjugate grid needs a box (problem or params)")
    box = np.asarray(box, dtype=float)
    if box.shape != (spec.n, 2):
        raise ContractError(f"box shape {box.shape} does not match n={spec.n}")
    return box


def _grid(box, points):
    axes = [np.linspace(box[i, 0], box[i, 1], points) for i in range(box.shape[0])]
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.reshape(-1) for m in mesh], axis=1)
    h = float(np.max((box[:, 1] - box[:, 0]) / (points - 1)))
    return X, h


_coarse_cache: dict = {}


def _coarse_moderated(spec, params, box):
    # F values on the coarse grid are y-independent, so cache them
    key = (id(spec), float(params.sigma), int(params.grid_points_per_dim), box.tobytes())
    hit = _coarse_cache.get(key)
    if hit is None:
        X, h = _grid(box, params.grid_points_per_dim)
        F = 0.5 * params.sigma * np.sum(X * X, axis=1) - _objective_on(spec, X)
        hit = (X, F, h)
        _coarse_cache[key] = hit
    return hit


def _check_sigma(spec, params):
    if spec.rho is not None and params.sigma <= spec.rho:
        raise PremiseError(
            f"sigma must exceed the curvature modulus: sigma={params.sigma},"
            f" rho={spec.rho}"
        )


def conjugate_value(spec: ProblemSpec, params: PotentialParams, y) -> float:
    """Grid-refined F*(y) = sup over the box of <y, x> - F(x).

    Two stages: argmax on the cached coarse grid, then repeated local zooms
    around it down to spacing 1e-5. F is convex for sigma > rho, hence the
    objective of the sup is concave and the coarse argmax brackets the true
    one; the returned value under-estimates the supremum by at most the
    local Lipschitz constant times the final spacing, within
    GRID_ERROR_BUDGET for desk-scale boxes.
    """
    if spec.n > 2:
        raise CapabilityError("conjugate grid supports n <= 2 only")
    _check_sigma(spec, params)
    y = np.asarray(y, dtype=float).reshape(spec.n)
    box = _conjugate_box(spec, params)
    X, F, h = _coarse_moderated(spec, params, box)
    vals = X @ y - F
    center = X[int(np.argmax(vals))]
    best = float(np.max(vals))
    for _ in range(25):
        if h <= _FINE_SPACING:
            break
        sub = np.stack(
            [
                np.maximum(box[:, 0], center - 2.0 * h),
                np.minimum(box[:, 1], center + 2.0 * h),
            ],
            axis=1,
        )
        X2, h = _grid(sub, _REFINE_POINTS)
        F2 = 0.5 * params.sigma * np.sum(X2 * X2, axis=1) - _objective_on(spec, X2)
        vals2 = X2 @ y - F2
        idx = int(np.argmax(vals2))
        center = X2[idx]
        best = max(best, float(vals2[idx]))
    return best


def potential_value(spec: ProblemSpec, params: PotentialParams, x, y, w) -> float:
    """L(x, y, w): conjugate coupling plus proximal and feasibility terms.

    Returns -<y, x> + F*(y) + (sigma/2)||x||^2 + (ell/2)||x - w||^2 when x
    satisfies the constraints linearized at w (equality rows to 1e-8,
    inequality rows to -1e-8), and +inf otherwise.
    """
    x = np.asarray(x, dtype=float).reshape(spec.n)
    y = np.asarray(y, dtype=float).reshape(spec.n)
    w = np.asarray(w, dtype=float).reshape(spec.n)
    if spec.m > 0:
        c, J = spec.constraint_oracle(w)
        resid = np.asarray(c, dtype=float) + np.asarray(J, dtype=float) @ (x - w)
        me = spec.eq_count
        if me and float(np.max(np.abs(resid[:me]))) > _LINEARIZED_TOL:
            return float("inf")
        if np.any(resid[me:] < -_LINEARIZED_TOL):
            return float("inf")
    value = -float(y @ x) + conjugate_value(spec, params, y)
    value += 0.5 * params.sigma * float(x @ x)
    diff = x - w
    value += 0.5 * params.ell * float(diff @ diff)
    return value


@dataclass(frozen=True)
class PotentialDescentReport:
    """Per-step potential differences along a trace tail.

    values[i] is L at the (first_index + i)-th iterate's coupling triple;
    differences are consecutive drops (should be nonnegative up to grid
    error); cd_estimates scale each drop by the squared step that produced
    it (0 where the step is zero); min_margin is the smallest drop.
    """

    min_margin: float
    differences: np.ndarray
    cd_estimates: np.ndarray
    values: np.ndarray
    first_index: int


def _step_records(trace):
    if trace and trace[-1].alpha == 0.0:
        return trace[:-1]
    return trace


def potential_descent_check(trace, spec: ProblemSpec, params: PotentialParams) -> PotentialDescentReport:
    """Check monotone decrease of the coupling potential over a trace tail.

    The tail must come from the slack-free full-step regime and the
    parameters must satisfy the descent premises: 2b >= sigma + ell and
    b >= sigma > rho, plus c_b*b >= theta*lip_h and ell > c_b*b when the
    constraints carry curvature. Violated premises raise PremiseError naming
    the failed inequality.
    """
    if len(trace) < 3:
        raise InsufficientDataError(
            f"need at least 3 records for a potential difference, got {len(trace)}"
        )
    _check_sigma(spec, params)
    if spec.rho is None:
        raise PremiseError("potential descent needs a declared curvature modulus rho")
    steps = _step_records(trace)
    if len(steps) < 2:
        raise InsufficientDataError("need at least 2 stepped records")
    bs = np.array([r.b for r in steps])
    b_min, b_max = float(bs.min()), float(bs.max())
    sigma, ell = params.sigma, params.ell
    if 2.0 * b_min < sigma + ell:
        raise PremiseError(
            f"2b >= sigma + ell violated: 2*{b_min} < {sigma} + {ell}"
        )
    if b_min < sigma:
        raise PremiseError(f"b >= sigma violated: {b_min} < {sigma}")
    nonlinear = spec.lip_h is None or spec.lip_h > 0.0
    if nonlinear:
        if spec.lip_h is None:
            raise PremiseError("constraint curvature bound lip_h is undeclared")
        theta_bar = float(trace[-1].theta)
        if params.c_b * b_min < theta_bar * spec.lip_h:
            raise PremiseError(
                f"c_b*b >= theta*lip_h violated: {params.c_b * b_min} <"
                f" {theta_bar * spec.lip_h}"
            )
        if ell <= params.c_b * b_max:
            raise PremiseError(
                f"ell > c_b*b violated: {ell} <= {params.c_b * b_max}"
            )
    for rec in trace:
        if rec.slack_max > _LINEARIZED_TOL:
            raise PremiseError(
                f"slacks must vanish over the checked window: record k={rec.k}"
                f" has slack {rec.slack_max:.3e}"
            )
    for rec in steps:
        if rec.alpha != 1.0:
            raise PremiseError(
                f"full steps required over the checked window: record k={rec.k}"
                f" has alpha={rec.alpha}"
            )

    xs = [np.asarray(r.x, dtype=float) for r in trace]
    values = []
    for j in range(len(trace) - 1):
        g = np.asarray(spec.objective_oracle(xs[j])[1], dtype=float)
        z = params.sigma * xs[j] - g
        values.append(potential_value(spec, params, xs[j + 1], z, xs[j]))
    values = np.array(values)
    differences = values[:-1] - values[1:]
    cd = np.zeros_like(differences)
    for i in range(differences.size):
        d = xs[i + 1] - xs[i]
        nsq = float(d @ d)
        cd[i] = 2.0 * differences[i] / nsq if nsq > 0.0 else 0.0
    return PotentialDescentReport(
        min_margin=float(differences.min()),
        differences=differences,
        cd_estimates=cd,
        values=values,
        first_index=int(trace[1].k),
    )


@dataclass(frozen=True)
class SubgradientReport:
    """Constructed potential-subgradient element for one trace step.

    vector stacks (-B d + sigma d, -d, -ell d - sum_i lam_i H_i d) for the
    step d between the two records; norm_ratio is ||vector|| / ||d|| (0 for
    a zero step); fenchel_gap is the signed residual of F(x) + F*(z) -
    <z, x> at the first record, which certifies the coupling point lies in
    the conjugate subdifferential when it vanishes to grid accuracy.
    """

    vector: np.ndarray
    norm_ratio: float
    fenchel_gap: float
    step_norm: float


def subgradient_bound_vector(spec: ProblemSpec, record_k, record_k1, B, params: PotentialParams) -> SubgradientReport:
    """Build the explicit subgradient element scaling like the step."""
    if spec.hessian_oracle is None:
        raise CapabilityError("subgradient bound needs constraint Hessians")
    _check_sigma(spec, params)
    if record_k.alpha <= 0.0:
        raise ContractError("record_k must carry a positive step size")
    x = np.asarray(record_k.x, dtype=float)
    x1 = np.asarray(record_k1.x, dtype=float)
    d = (x1 - x) / record_k.alpha
    Bmat = np.asarray(B, dtype=float)
    if Bmat.ndim == 0:
        Bmat = float(Bmat) * np.eye(spec.n)
    f_val, g = spec.objective_oracle(x)
    z = params.sigma * x - np.asarray(g, dtype=float)
    moderated = 0.5 * params.sigma * float(x @ x) - float(f_val)
    gap = moderated + conjugate_value(spec, params, z) - float(z @ x)

    step_norm = float(np.linalg.norm(d))
    if step_norm == 0.0:
        return SubgradientReport(
            vector=np.zeros(3 * spec.n),
            norm_ratio=0.0,
            fenchel_gap=float(gap),
            step_norm=0.0,
        )
    H = constraint_hessians(spec, x)
    lam = np.asarray(record_k.lam, dtype=float)
    curv = np.zeros(spec.n)
    for i in range(spec.m):
        curv += lam[i] * (H[i] @ d)
    vector = np.concatenate(
        [-Bmat @ d + params.sigma * d, -d, -params.ell * d - curv]
    )
    ratio = float(np.linalg.norm(vector)) / step_norm
    return SubgradientReport(
        vector=vector,
        norm_ratio=ratio,
        fenchel_gap=float(gap),
        step_norm=step_norm,
    )


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log error against iteration index."""

    q0: float
    q1: float
    r_squared: float


def fit_linear_rate(errors) -> RateFit:
    """Fit errors ~ q1 * q0^k by least squares on log values.

    Positions 0..len-1 are the abscissae. Errors must be strictly positive
    (drop exact zeros from the tail first); fewer than 3 points cannot
    witness a rate.
    """
    arr = np.asarray(errors, dtype=float).reshape(-1)
    if arr.size < 3:
        raise InsufficientDataError(f"need at least 3 errors, got {arr.size}")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ContractError("errors must be finite and strictly positive")
    k = np.arange(arr.size, dtype=float)
    logs = np.log(arr)
    slope, intercept = np.polyfit(k, logs, 1)
    fitted = intercept + slope * k
    ss_res = float(np.sum((logs - fitted) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return RateFit(q0=float(np.exp(slope)), q1=float(np.exp(intercept)), r_squared=float(r2))


def trace_errors(trace, reference=None) -> np.ndarray:
    """Distances ||x_k - reference||, defaulting to the last iterate."""
    if not trace:
        raise InsufficientDataError("empty trace")
    ref = np.asarray(reference if reference is not None else trace[-1].x, dtype=float)
    return np.array([float(np.linalg.norm(np.asarray(r.x) - ref)) for r in trace])


def positive_prefix(errors) -> np.ndarray:
    """Drop the trailing zero (or negative) entries of an error sequence."""
    arr = np.asarray(errors, dtype=float).reshape(-1)
    end = arr.size
    while end > 0 and arr[end - 1] <= 0.0:
        end -= 1
    return arr[:end]


@dataclass(frozen=True)
class MfcqReport:
    """Outcome of the constraint-qualification check at a point."""

    holds: bool
    witness: Optional[np.ndarray]
    active: tuple
    detail: str


def check_mfcq(spec: ProblemSpec, x, active_tol: float = 1e-6) -> MfcqReport:
    """Rank test on equality gradients plus an interior-direction subproblem.

    x must be feasible to active_tol. Equality gradients must be linearly
    independent; when inequalities are active at x, a strictly convex
    subproblem searches for a direction w with J_E w = 0 and grad c_i' w
    >= 1 on the active rows, solved through the relaxed QP machinery at a
    high penalty; existence (max slack below 1e-6) certifies the
    qualification and w is the witness. Without active inequalities the
    witness is a unit null-space vector of the equality gradients (zero when
    they pin every direction).
    """
    x = np.asarray(x, dtype=float).reshape(spec.n)
    if spec.m == 0:
        return MfcqReport(True, np.zeros(spec.n), (), "no constraints")
    c, J = spec.constraint_oracle(x)
    c = np.asarray(c, dtype=float)
    J = np.asarray(J, dtype=float)
    v = constraint_violation(spec, c)
    if v > active_tol:
        raise ContractError(
            f"x must be feasible to active_tol={active_tol}: v(x)={v:.3e}"
        )
    me = spec.eq_count
    if me:
        sv = np.linalg.svd(J[:me], compute_uv=False)
        rank = int(np.sum(sv > 1e-8 * sv[0])) if sv[0] > 0.0 else 0
        if rank < me:
            return MfcqReport(
                False, None, (),
                f"equality gradients dependent: rank {rank} of {me}",
            )
    active = tuple(
        i for i in range(me, spec.m) if abs(float(c[i])) <= active_tol
    )
    if not active:
        if me and spec.n > me:
            _, _, vt = np.linalg.svd(J[:me])
            w = vt[me]
            lead = w[np.nonzero(np.abs(w) > 1e-12)[0][0]]
            if lead < 0.0:
                w = -w
            return MfcqReport(True, w, (), "no active inequalities; null direction")
        if me:
            return MfcqReport(True, np.zeros(spec.n), (), "equalities pin all directions")
        return MfcqReport(True, np.zeros(spec.n), (), "no active inequalities")
    rows = np.vstack([J[:me], J[list(active)]])
    cvec = np.concatenate([np.zeros(me), -np.ones(len(active))])
    qp = QpData(
        B=np.eye(spec.n),
        g=np.zeros(spec.n),
        c=cvec,
        J=rows,
        theta=_MFCQ_THETA,
        eq_count=me,
        ineq_count=len(active),
        b_lower=1.0,
    )
    sol = solve_qp(qp, QpSolverSettings())
    if sol.slack_max <= _MFCQ_SLACK_TOL:
        return MfcqReport(True, sol.d.copy(), active, "interior direction found")
    return MfcqReport(
        False, None, active,
        f"no interior direction: best residual slack {sol.slack_max:.3e}",
    )


@dataclass(frozen=True)
class MonitorReport:
    """One monitor's verdict on a recorded run.

    margin is the monitor's worst signed slack (nonnegative means the
    property held with room); detail says where the extreme occurred.
    """

    name: str
    passed: bool
    margin: float
    detail: str


def monitor_multiplier_bounds(trace, spec: ProblemSpec, theta0: float = 1.0, tol: float = 1e-8) -> MonitorReport:
    """Recheck the penalty-implied multiplier bounds at every iteration."""
    worst = 0.0
    where = "all rows within bounds"
    me = spec.eq_count
    for k, rec in enumerate(trace):
        theta = theta0 if k == 0 else trace[k - 1].theta
        cls = rec.classification
        violated = set(cls.violated)
        lam = np.asarray(rec.lam, dtype=float)
        for i in range(spec.m):
            if i < me:
                if i in violated:
                    gap = abs(lam[i] + cls.signs[i] * theta)
                else:
                    gap = abs(lam[i]) - theta
            else:
                if i in violated:
                    gap = abs(lam[i] - theta)
                else:
                    gap = max(-lam[i], lam[i] - theta)
            if gap > worst:
                worst = gap
                where = f"row {i} at k={rec.k}: gap {gap:.3e}"
    return MonitorReport("multiplier-bounds", worst <= tol, tol - worst, where)


def monitor_merit_decrease(trace, spec: ProblemSpec, eta: float = 0.1, tol: float = 1e-12) -> MonitorReport:
    """Recompute the accepted sufficient-decrease condition for every step."""
    if len(trace) < 2:
        raise InsufficientDataError("need at least 2 records")
    margin = float("inf")
    where = "no steps"
    for k in range(len(trace) - 1):
        rec, nxt = trace[k], trace[k + 1]
        if rec.alpha <= 0.0:
            continue
        x = np.asarray(rec.x, dtype=float)
        x1 = np.asarray(nxt.x, dtype=float)
        d = (x1 - x) / rec.alpha
        theta = rec.theta
        f0 = float(spec.objective_oracle(x)[0])
        f1 = float(spec.objective_oracle(x1)[0])
        if spec.m:
            v0 = constraint_violation(spec, spec.constraint_oracle(x)[0])
            v1 = constraint_violation(spec, spec.constraint_oracle(x1)[0])
        else:
            v0 = v1 = 0.0
        achieved = (f0 + theta * v0) - (f1 + theta * v1)
        required = eta * rec.alpha * 0.5 * rec.b * float(d @ d)
        slack = achieved - required
        if slack < margin:
            margin = slack
            where = f"k={rec.k}: achieved {achieved:.6e} vs required {required:.6e}"
    if margin == float("inf"):
        margin = 0.0
    return MonitorReport("merit-decrease", margin >= -tol, margin, where)


def monitor_theta_tail(trace) -> MonitorReport:
    """Penalty weight must be constant over the final half of the run."""
    if not trace:
        raise InsufficientDataError("empty trace")
    tail = trace[len(trace) // 2 :]
    thetas = np.array([r.theta for r in tail])
    spread = float(thetas.max() - thetas.min())
    detail = (
        f"theta={thetas[-1]} over final {len(tail)} records"
        if spread == 0.0
        else f"theta moved by {spread:.3e} in the final {len(tail)} records"
    )
    return MonitorReport("theta-tail", spread == 0.0, -spread, detail)


def monitor_slack_tail(trace, window: int = 20, bound: float = 1e-10) -> MonitorReport:
    """Relaxation slacks must be below bound over the final records."""
    if not trace:
        raise InsufficientDataError("empty trace")
    tail = trace[-min(window, len(trace)) :]
    worst = max(r.slack_max for r in tail)
    k_worst = max(tail, key=lambda r: r.slack_max).k
    return MonitorReport(
        "slack-tail",
        worst <= bound,
        bound - worst,
        f"max slack {worst:.3e} at k={k_worst} over final {len(tail)} records",
    )


def monitor_full_step(trace, spec: ProblemSpec, slack_tol: float = 1e-10) -> MonitorReport:
    """Unit steps must persist once relaxation slacks vanish.

    Guaranteed only for affine constraints with b above rho, so those are
    premises, not failures.
    """
    if spec.lip_h is None or spec.lip_h > 0.0:
        raise PremiseError(
            "full-step guarantee needs affine constraints (declared lip_h = 0)"
        )
    if spec.rho is None:
        raise PremiseError("full-step guarantee needs a declared rho")
    steps = _step_records(trace)
    if not steps:
        raise InsufficientDataError("no stepped records")
    b_min = min(r.b for r in steps)
    if b_min <= spec.rho:
        raise PremiseError(f"b > rho violated: {b_min} <= {spec.rho}")
    start = None
    for i, rec in enumerate(steps):
        if rec.slack_max <= slack_tol:
            start = i
            break
    if start is None:
        return MonitorReport("full-step", False, -1.0, "slacks never vanished")
    alphas = np.array([r.alpha for r in steps[start:]])
    margin = float(alphas.min() - 1.0)
    k0 = steps[start].k
    return MonitorReport(
        "full-step",
        bool(np.all(alphas == 1.0)),
        margin,
        f"alpha from k={k0}: min {alphas.min()}",
    )


def monitor_step_bound(trace, spec: ProblemSpec, tau_alpha: float = 0.5) -> MonitorReport:
    """Accepted steps must respect the backtracking lower bound.

    The line search provably exits once the trial step is below
    b / (rho + theta * lip_h), so each accepted alpha is at least tau_alpha
    to the ceiling of the log of that threshold (clamped at one).
    """
    if spec.rho is None:
        raise PremiseError("step bound needs a declared rho")
    if spec.lip_h is None:
        raise PremiseError("step bound needs a declared lip_h")
    margin = float("inf")
    where = "no steps"
    for rec in _step_records(trace):
        denom = spec.rho + rec.theta * spec.lip_h
        if denom <= 0.0:
            bound = 1.0
        else:
            abar = rec.b / denom
            exponent = max(0, math.ceil(math.log(abar) / math.log(tau_alpha)))
            bound = tau_alpha**exponent
        slack = rec.alpha - bound
        if slack < margin:
            margin = slack
            where = f"k={rec.k}: alpha {rec.alpha} vs bound {bound:.6g}"
    if margin == float("inf"):
        margin = 0.0
    return MonitorReport("step-bound", margin >= -1e-12, margin, where)


def monitor_potential(trace, spec: ProblemSpec, params: PotentialParams) -> MonitorReport:
    """Potential descent margins over a premise-valid tail."""
    report = potential_descent_check(trace, spec, params)
    return MonitorReport(
        "potential",
        report.min_margin >= -GRID_ERROR_BUDGET,
        report.min_margin,
        f"min potential drop {report.min_margin:.6e} over"
        f" {report.differences.size} steps",
    )


def monitor_subgradient(trace, spec: ProblemSpec, params: PotentialParams) -> MonitorReport:
    """Subgradient-element ratios and conjugate identity along a tail."""
    steps = _step_records(trace)
    if len(steps) < 1 or len(trace) < 2:
        raise InsufficientDataError("need at least one step")
    max_ratio = 0.0
    max_gap = 0.0
    lam_norm = 0.0
    hess_norm = 0.0
    b_max = 0.0
    for k in range(len(steps)):
        rec, nxt = trace[k], trace[k + 1]
        rep = subgradient_bound_vector(spec, rec, nxt, rec.b, params)
        max_ratio = max(max_ratio, rep.norm_ratio)
        max_gap = max(max_gap, abs(rep.fenchel_gap))
        lam_norm = max(lam_norm, float(np.sum(np.abs(rec.lam))))
        b_max = max(b_max, rec.b)
        H = constraint_hessians(spec, rec.x)
        for i in range(spec.m):
            hess_norm = max(hess_norm, float(np.max(np.abs(np.linalg.eigvalsh(H[i])))))
    bound = math.sqrt(
        (params.sigma + b_max) ** 2
        + 1.0
        + (params.ell + lam_norm * hess_norm) ** 2
    )
    ratio_ok = max_ratio <= bound + 1e-9
    gap_ok = max_gap <= GRID_ERROR_BUDGET
    margin = min(bound - max_ratio, GRID_ERROR_BUDGET - max_gap)
    return MonitorReport(
        "subgradient",
        ratio_ok and gap_ok,
        margin,
        f"max ratio {max_ratio:.4g} (bound {bound:.4g}), max conjugate gap"
        f" {max_gap:.3e}",
    )
