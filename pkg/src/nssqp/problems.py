"""Problem model: specs, oracle evaluation, feasibility and KKT measures.

A problem is

    minimize f(x)  subject to  c_i(x) = 0 (i in E),  c_i(x) >= 0 (i in I),

with f possibly nonsmooth but upper-C2 on the box domain: for some rho and
every x, xbar in the box,

    f(x) - f(xbar) - <g, x - xbar> <= (rho / 2) ||x - xbar||^2,

where g is the subgradient returned by the objective oracle at xbar.
Constraint rows are ordered equalities first, then inequalities; all modules
rely on that ordering.

Functions here are pure and safe for concurrent use on distinct data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CapabilityError, ContractError, DomainError, EvaluationError

_BOX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Static description of one problem instance.

    Parameters
    ----------
    n : int
        Number of decision variables.
    eq_indices, ineq_indices : tuple of int
        Row indices of equality and inequality constraints. Equalities must
        occupy rows 0..me-1 and inequalities me..m-1.
    objective_oracle : callable
        Maps x (shape (n,)) to (f, g) with g a subgradient of f at x. Ties
        between smooth pieces resolve to the piece with the smallest index.
    constraint_oracle : callable or None
        Maps x to (c, J) with c shape (m,) and J shape (m, n). None means no
        constraints.
    hessian_oracle : callable or None
        Maps x to an (m, n, n) array of constraint Hessians. Optional; needed
        only by curvature-aware diagnostics.
    rho : float or None
        Declared upper-C2 modulus of f on the box.
    lip_h : float or None
        Declared curvature bound H for the constraints: the linearization
        error of each c_i is at most (H / 2) ||x' - x||^2.
    box : ndarray, shape (n, 2)
        Lower and upper bounds of the domain the oracles are trusted on.
    reference : tuple or None
        Optional (x_opt, f_opt) used by tests and reports.
    objective_batch : callable or None
        Optional vectorized objective: maps X (N, n) to values (N,). Pure
        performance hook for grid-based diagnostics; must agree with
        objective_oracle values.
    constraint_batch : callable or None
        Optional vectorized constraints: maps X (N, n) to values (N, m).
        Same role as objective_batch.
    """

    n: int
    eq_indices: tuple
    ineq_indices: tuple
    objective_oracle: Callable
    constraint_oracle: Optional[Callable] = None
    hessian_oracle: Optional[Callable] = None
    rho: Optional[float] = None
    lip_h: Optional[float] = None
    box: Optional[np.ndarray] = None
    reference: Optional[tuple] = None
    objective_batch: Optional[Callable] = None
    constraint_batch: Optional[Callable] = None

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"n must be positive, got {self.n}")
        eq = tuple(int(i) for i in self.eq_indices)
        ineq = tuple(int(i) for i in self.ineq_indices)
        object.__setattr__(self, "eq_indices", eq)
        object.__setattr__(self, "ineq_indices", ineq)
        me, mi = len(eq), len(ineq)
        if eq != tuple(range(me)) or ineq != tuple(range(me, me + mi)):
            raise ContractError("constraint rows must be equalities first, then inequalities")
        if (me + mi) > 0 and self.constraint_oracle is None:
            raise ContractError("constraint indices given but no constraint oracle")
        box = np.asarray(self.box, dtype=float)
        if box.shape != (self.n, 2):
            raise ContractError(f"box must have shape ({self.n}, 2), got {box.shape}")
        if not np.all(np.isfinite(box)) or np.any(box[:, 0] > box[:, 1]):
            raise ContractError("box bounds must be finite with lo <= hi")
        object.__setattr__(self, "box", box)
        if self.rho is not None and self.rho < 0:
            raise ContractError("rho must be nonnegative")
        if self.lip_h is not None and self.lip_h < 0:
            raise ContractError("lip_h must be nonnegative")

    @property
    def eq_count(self) -> int:
        return len(self.eq_indices)

    @property
    def ineq_count(self) -> int:
        return len(self.ineq_indices)

    @property
    def m(self) -> int:
        return len(self.eq_indices) + len(self.ineq_indices)


@dataclass(frozen=True)
class KktReport:
    """Residuals of the first-order optimality system at a point.

    stationarity    ||g - sum_i lambda_i grad c_i(x)||_2
    primal_eq       max_i |c_i(x)| over equalities
    primal_ineq     max_i max(0, -c_i(x)) over inequalities
    complementarity max_i |lambda_i c_i(x)| over inequalities
    dual_sign       max_i max(0, -lambda_i) over inequalities
    """

    stationarity: float
    primal_eq: float
    primal_ineq: float
    complementarity: float
    dual_sign: float

    @property
    def max_residual(self) -> float:
        return max(
            self.stationarity,
            self.primal_eq,
            self.primal_ineq,
            self.complementarity,
            self.dual_sign,
        )


@dataclass(frozen=True)
class UpperC2Report:
    """Outcome of sampling the upper-C2 inequality over the box."""

    max_violation: float
    worst_pair: tuple
    rho_used: float
    estimated_rho: Optional[float] = None


@dataclass(frozen=True)
class LinearizationReport:
    """Outcome of sampling the constraint linearization-error bound."""

    max_violation: float
    worst_pair: tuple
    lip_h_used: float


def _check_in_box(spec: ProblemSpec, x: np.ndarray) -> None:
    lo, hi = spec.box[:, 0], spec.box[:, 1]
    if np.any(x < lo - _BOX_TOL) or np.any(x > hi + _BOX_TOL):
        raise DomainError(f"point {x!r} outside box domain")


def evaluate(spec: ProblemSpec, x: np.ndarray):
    """Evaluate objective and constraint oracles at x.

    Returns
    -------
    (f, g, c, J) : float, (n,), (m,), (m, n)
        Objective value, subgradient, constraint values, constraint Jacobian.
        c and J are empty arrays when the problem has no constraints.

    Raises
    ------
    DomainError
        x outside the box (tolerance 1e-9).
    EvaluationError
        Non-finite oracle output or mismatched shapes.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (spec.n,):
        raise ContractError(f"x must have shape ({spec.n},), got {x.shape}")
    _check_in_box(spec, x)

    f, g = spec.objective_oracle(x)
    f = float(f)
    g = np.asarray(g, dtype=float).reshape(-1)
    if g.shape != (spec.n,):
        raise EvaluationError(f"subgradient shape {g.shape} does not match n={spec.n}")
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise EvaluationError(f"objective oracle returned non-finite output at {x!r}")

    if spec.m == 0:
        return f, g, np.zeros(0), np.zeros((0, spec.n))
    c, J = spec.constraint_oracle(x)
    c = np.asarray(c, dtype=float).reshape(-1)
    J = np.asarray(J, dtype=float).reshape(c.shape[0], -1)
    if c.shape != (spec.m,) or J.shape != (spec.m, spec.n):
        raise EvaluationError(
            f"constraint oracle shapes {c.shape}, {J.shape} do not match m={spec.m}, n={spec.n}"
        )
    if not np.all(np.isfinite(c)) or not np.all(np.isfinite(J)):
        raise EvaluationError(f"constraint oracle returned non-finite output at {x!r}")
    return f, g, c, J


def constraint_hessians(spec: ProblemSpec, x: np.ndarray) -> np.ndarray:
    """Return the (m, n, n) constraint Hessian stack at x.

    Raises CapabilityError when the problem declares no Hessian oracle.
    """
    if spec.m == 0:
        return np.zeros((0, spec.n, spec.n))
    if spec.hessian_oracle is None:
        raise CapabilityError("problem declares no constraint Hessian oracle")
    H = np.asarray(spec.hessian_oracle(np.asarray(x, dtype=float)), dtype=float)
    if H.shape != (spec.m, spec.n, spec.n):
        raise EvaluationError(f"hessian oracle shape {H.shape} != ({spec.m}, {spec.n}, {spec.n})")
    return H


def constraint_violation(spec: ProblemSpec, c: np.ndarray) -> float:
    """Aggregate infeasibility sum_E |c_i| + sum_I max(0, -c_i).

    Zero exactly when every equality holds and every inequality is satisfied.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.shape != (spec.m,):
        raise ContractError(f"c must have shape ({spec.m},), got {c.shape}")
    me = spec.eq_count
    v_eq = float(np.sum(np.abs(c[:me])))
    v_in = float(np.sum(np.maximum(0.0, -c[me:])))
    return v_eq + v_in


def kkt_residual(spec: ProblemSpec, x: np.ndarray, lam: np.ndarray, g=None) -> KktReport:
    """Residuals of the optimality system at (x, lam).

    The multiplier vector follows the constraint ordering (equalities first).
    g defaults to the oracle's own subgradient selection; pass an explicit
    witness to test a different element. Empty blocks report 0.0. Invariant
    under reordering of rows within the equality block and within the
    inequality block (paired with lam).
    """
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.shape != (spec.m,):
        raise ContractError(f"lam must have shape ({spec.m},), got {lam.shape}")
    f, g_oracle, c, J = evaluate(spec, x)
    if g is None:
        g = g_oracle
    else:
        g = np.asarray(g, dtype=float).reshape(-1)
        if g.shape != (spec.n,):
            raise ContractError(f"g must have shape ({spec.n},), got {g.shape}")
    me = spec.eq_count
    stat = float(np.linalg.norm(g - J.T @ lam)) if spec.m else float(np.linalg.norm(g))
    c_eq, c_in = c[:me], c[me:]
    lam_in = lam[me:]
    primal_eq = float(np.max(np.abs(c_eq))) if c_eq.size else 0.0
    primal_in = float(np.max(np.maximum(0.0, -c_in))) if c_in.size else 0.0
    comp = float(np.max(np.abs(lam_in * c_in))) if c_in.size else 0.0
    dual = float(np.max(np.maximum(0.0, -lam_in))) if c_in.size else 0.0
    return KktReport(stat, primal_eq, primal_in, comp, dual)


def _sample_box(spec: ProblemSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    lo, hi = spec.box[:, 0], spec.box[:, 1]
    return rng.uniform(lo, hi, size=(count, spec.n))


def _upper_c2_gaps(spec, xs, xbars):
    """Per-pair (gap_without_rho_term, squared_distance) arrays."""
    gaps = np.empty(len(xs))
    dist2 = np.empty(len(xs))
    for i, (x, xb) in enumerate(zip(xs, xbars)):
        fx, _ = spec.objective_oracle(x)
        fb, gb = spec.objective_oracle(xb)
        d = x - xb
        gaps[i] = fx - fb - float(np.dot(gb, d))
        dist2[i] = float(np.dot(d, d))
    return gaps, dist2


def validate_upper_c2(
    spec: ProblemSpec,
    sample_count: int = 1000,
    seed: int = 0,
    rho: Optional[float] = None,
) -> UpperC2Report:
    """Sample the upper-C2 inequality over the box.

    Draws sample_count pairs (x, xbar) uniformly in the box and evaluates

        f(x) - f(xbar) - <g(xbar), x - xbar> - (rho / 2) ||x - xbar||^2,

    whose maximum should be <= 0 up to 1e-10 when rho is a valid modulus.
    With rho omitted and none declared on the spec, the smallest modulus
    making all sampled inequalities hold is estimated by bisection to 1e-6
    and reported in estimated_rho (and used as rho_used).
    """
    if sample_count < 1:
        raise ContractError("sample_count must be positive")
    rng = np.random.default_rng(seed)
    xs = _sample_box(spec, rng, sample_count)
    xbars = _sample_box(spec, rng, sample_count)
    gaps, dist2 = _upper_c2_gaps(spec, xs, xbars)

    estimated = None
    if rho is None:
        rho = spec.rho
    if rho is None:
        estimated = _bisect_rho(gaps, dist2)
        rho = estimated

    viol = gaps - 0.5 * rho * dist2
    worst = int(np.argmax(viol))
    return UpperC2Report(
        max_violation=float(viol[worst]),
        worst_pair=(xs[worst].copy(), xbars[worst].copy()),
        rho_used=float(rho),
        estimated_rho=estimated,
    )


def _bisect_rho(gaps: np.ndarray, dist2: np.ndarray) -> float:
    def holds(r):
        return np.max(gaps - 0.5 * r * dist2) <= 0.0

    lo, hi = 0.0, 1.0
    if holds(lo):
        return 0.0
    while not holds(hi):
        hi *= 2.0
        if hi > 1e12:
            raise EvaluationError("no finite upper-C2 modulus found on samples")
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return hi


def validate_linearization(
    spec: ProblemSpec,
    sample_count: int = 1000,
    seed: int = 0,
    lip_h: Optional[float] = None,
) -> LinearizationReport:
    """Sample the constraint linearization-error bound over the box.

    Checks |c_i(x') - c_i(x) - <grad c_i(x), x' - x>| <= (H / 2) ||x' - x||^2
    row-wise on sampled pairs; the reported max_violation should be <= 1e-10.
    """
    if lip_h is None:
        lip_h = spec.lip_h
    if lip_h is None:
        raise CapabilityError("no curvature bound declared and none supplied")
    if spec.m == 0:
        return LinearizationReport(0.0, (None, None), float(lip_h))
    rng = np.random.default_rng(seed)
    xs = _sample_box(spec, rng, sample_count)
    xps = _sample_box(spec, rng, sample_count)
    worst_v, worst_pair = -np.inf, (None, None)
    for x, xp in zip(xs, xps):
        c0, J0 = spec.constraint_oracle(x)
        c1, _ = spec.constraint_oracle(xp)
        d = xp - x
        err = np.abs(np.asarray(c1) - np.asarray(c0) - np.asarray(J0) @ d)
        v = float(np.max(err) - 0.5 * lip_h * float(np.dot(d, d)))
        if v > worst_v:
            worst_v, worst_pair = v, (x.copy(), xp.copy())
    return LinearizationReport(worst_v, worst_pair, float(lip_h))
