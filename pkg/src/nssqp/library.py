"""Desk-scale problem catalog and a grid-based reference oracle.

Each catalog entry bundles oracles, a starting point, tags, and a reference
solution with a note on where that reference comes from. The brute-force
oracle at the bottom never touches the solver: it localizes minimizers by
staged grid refinement over the box and polishes the winning cell, so solver
output can be checked against a fully independent computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CatalogError, ContractError, ResolutionError
from .problems import ProblemSpec


@dataclass(frozen=True)
class ReferenceSolution:
    """Known minimizers of a catalog problem.

    minimizers lists every global minimizer, lexicographically smallest
    first; objective is the shared optimal value; tol is the accuracy the
    reference is trusted to, used when comparing against the grid oracle.
    """

    minimizers: tuple
    objective: float
    note: str
    tol: float = 1e-6


@dataclass(frozen=True)
class NamedProblem:
    """A catalog entry: problem data plus a start point, tags, and reference."""

    name: str
    spec: ProblemSpec
    x0: np.ndarray
    expected: ReferenceSolution
    tags: frozenset


def _box(bounds, n):
    return np.array([bounds] * n, dtype=float)


def _box_rows(x, bounds):
    # rows x_i - lo >= 0 and hi - x_i >= 0 for each coordinate
    lo, hi = bounds
    c = []
    rows = []
    for i in range(x.size):
        c.append(float(x[i]) - lo)
        r = np.zeros(x.size)
        r[i] = 1.0
        rows.append(r)
        c.append(hi - float(x[i]))
        rows.append(-r)
    return np.array(c), np.array(rows)


def _box_rows_batch(X, bounds):
    lo, hi = bounds
    cols = []
    for i in range(X.shape[1]):
        cols.append(X[:, i] - lo)
        cols.append(hi - X[:, i])
    return np.stack(cols, axis=1)


def _dc1d():
    def objective(x):
        s = float(x[0])
        left = s * s - s
        right = s * s + s
        if left <= right:
            return left, np.array([2.0 * s - 1.0])
        return right, np.array([2.0 * s + 1.0])

    def objective_batch(X):
        s = np.asarray(X, dtype=float)[:, 0]
        return s * s - np.abs(s)

    def constraints(x):
        c, J = _box_rows(np.asarray(x, dtype=float), (-2.0, 2.0))
        return c, J

    def constraint_batch(X):
        return _box_rows_batch(np.asarray(X, dtype=float), (-2.0, 2.0))

    def hessians(x):
        return np.zeros((2, 1, 1))

    spec = ProblemSpec(
        n=1,
        eq_indices=(),
        ineq_indices=(0, 1),
        objective_oracle=objective,
        constraint_oracle=constraints,
        hessian_oracle=hessians,
        rho=2.0,
        lip_h=0.0,
        box=_box((-2.0, 2.0), 1),
        reference=(np.array([0.5]), -0.25),
        objective_batch=objective_batch,
        constraint_batch=constraint_batch,
    )
    expected = ReferenceSolution(
        minimizers=(np.array([-0.5]), np.array([0.5])),
        objective=-0.25,
        note="closed form: each smooth branch s*s -+ s has its stationary"
        " point at |s| = 1/2 with value -1/4; symmetric pair",
    )
    return NamedProblem("dc1d", spec, np.array([2.0]), expected, frozenset({"affine"}))


def _minq2():
    def objective(x):
        x1, x2 = float(x[0]), float(x[1])
        p0 = (x1 - 1.0) ** 2 + x2 * x2
        p1 = (x1 + 1.0) ** 2 + x2 * x2 + 0.5
        if p0 <= p1:
            return p0, np.array([2.0 * (x1 - 1.0), 2.0 * x2])
        return p1, np.array([2.0 * (x1 + 1.0), 2.0 * x2])

    def objective_batch(X):
        X = np.asarray(X, dtype=float)
        p0 = (X[:, 0] - 1.0) ** 2 + X[:, 1] ** 2
        p1 = (X[:, 0] + 1.0) ** 2 + X[:, 1] ** 2 + 0.5
        return np.minimum(p0, p1)

    def constraints(x):
        x = np.asarray(x, dtype=float)
        ce = float(x[0] + x[1] - 0.2)
        cb, Jb = _box_rows(x, (-3.0, 3.0))
        c = np.concatenate([[ce], cb])
        J = np.vstack([np.array([[1.0, 1.0]]), Jb])
        return c, J

    def constraint_batch(X):
        X = np.asarray(X, dtype=float)
        ce = X[:, 0] + X[:, 1] - 0.2
        return np.concatenate([ce[:, None], _box_rows_batch(X, (-3.0, 3.0))], axis=1)

    def hessians(x):
        return np.zeros((5, 2, 2))

    spec = ProblemSpec(
        n=2,
        eq_indices=(0,),
        ineq_indices=(1, 2, 3, 4),
        objective_oracle=objective,
        constraint_oracle=constraints,
        hessian_oracle=hessians,
        rho=2.0,
        lip_h=0.0,
        box=_box((-3.0, 3.0), 2),
        reference=(np.array([0.6, -0.4]), 0.32),
        objective_batch=objective_batch,
        constraint_batch=constraint_batch,
    )
    expected = ReferenceSolution(
        minimizers=(np.array([0.6, -0.4]),),
        objective=0.32,
        note="closed form: on the line x1 + x2 = 0.2 the first branch"
        " (x1-1)^2 + x2^2 is stationary at (0.6, -0.4); the other branch's"
        " on-line minimum is 1.22, so this one is global",
    )
    return NamedProblem(
        "minq2", spec, np.array([1.2, 0.8]), expected, frozenset({"affine"})
    )


def _affine_eq():
    def objective(x):
        x = np.asarray(x, dtype=float)
        sigma = np.where(x >= 0.0, 1.0, -1.0)
        val = float(x @ x) - 0.5 * float(np.sum(np.abs(x)))
        return val, 2.0 * x - 0.5 * sigma

    def objective_batch(X):
        X = np.asarray(X, dtype=float)
        return np.sum(X * X, axis=1) - 0.5 * np.sum(np.abs(X), axis=1)

    def constraints(x):
        x = np.asarray(x, dtype=float)
        c = np.array([x[0] + x[1] - 1.0, x[0] - x[1] - 0.4])
        J = np.array([[1.0, 1.0], [1.0, -1.0]])
        return c, J

    def constraint_batch(X):
        X = np.asarray(X, dtype=float)
        return np.stack([X[:, 0] + X[:, 1] - 1.0, X[:, 0] - X[:, 1] - 0.4], axis=1)

    def hessians(x):
        return np.zeros((2, 2, 2))

    # the box is a trust region for the oracles, not a constraint row
    spec = ProblemSpec(
        n=2,
        eq_indices=(0, 1),
        ineq_indices=(),
        objective_oracle=objective,
        constraint_oracle=constraints,
        hessian_oracle=hessians,
        rho=2.0,
        lip_h=0.0,
        box=_box((-2.0, 2.0), 2),
        reference=(np.array([0.7, 0.3]), 0.08),
        objective_batch=objective_batch,
        constraint_batch=constraint_batch,
    )
    expected = ReferenceSolution(
        minimizers=(np.array([0.7, 0.3]),),
        objective=0.08,
        note="two independent equalities pin the unique feasible point"
        " (0.7, 0.3); objective there is 0.49 + 0.09 - 0.5",
    )
    return NamedProblem(
        "affine-eq", spec, np.array([0.5, 0.5]), expected, frozenset({"affine"})
    )


def _infeasible_lin():
    target = np.array([0.97, 0.75])
    weights = np.array([5.0, 1.2])

    def objective(x):
        d = np.asarray(x, dtype=float) - target
        return 0.5 * float(weights @ (d * d)), weights * d

    def objective_batch(X):
        D = np.asarray(X, dtype=float) - target
        return 0.5 * (D * D) @ weights

    def constraints(x):
        x = np.asarray(x, dtype=float)
        return np.array([float(x @ x) - 1.0]), 2.0 * x[None, :]

    def constraint_batch(X):
        X = np.asarray(X, dtype=float)
        return (np.sum(X * X, axis=1) - 1.0)[:, None]

    def hessians(x):
        return 2.0 * np.eye(2)[None, :, :]

    # stationary point on the unit circle, solved offline by bisecting the
    # secular equation sum((w_i t_i / (w_i + 2 lam))^2) = 1 for the
    # multiplier; cross-checked by 1D minimization over the circle angle
    x_opt = np.array([0.86604883271789423, 0.49995941770104996])
    f_opt = 0.06452678862611963
    # the box is a trust region for the oracles, not a constraint row
    spec = ProblemSpec(
        n=2,
        eq_indices=(0,),
        ineq_indices=(),
        objective_oracle=objective,
        constraint_oracle=constraints,
        hessian_oracle=hessians,
        rho=5.0,
        lip_h=2.0,
        box=_box((-2.0, 2.0), 2),
        reference=(x_opt, f_opt),
        objective_batch=objective_batch,
        constraint_batch=constraint_batch,
    )
    expected = ReferenceSolution(
        minimizers=(x_opt.copy(),),
        objective=f_opt,
        note="anisotropic quadratic pulled toward (0.97, 0.75) over the unit"
        " circle; minimizer from 1D minimization over the circle angle;"
        " the start (0, 0) has a zero constraint gradient, so the first"
        " linearization is infeasible",
    )
    return NamedProblem(
        "infeasible-lin",
        spec,
        np.array([0.0, 0.0]),
        expected,
        frozenset({"nonlinear-eq", "elastic-start"}),
    )


# recourse2 scenario data: (weight a_s, ((center, offset), (center, offset)))
_R2_LIN = np.array([0.2, -0.1])
_R2_SCEN = (
    (0.6, ((np.array([0.5, 0.0]), 0.0), (np.array([-0.5, 0.5]), 0.05))),
    (0.8, ((np.array([0.0, -0.3]), 0.0), (np.array([0.6, 0.4]), 0.4))),
    (0.6, ((np.array([0.3, 0.1]), 0.0), (np.array([-0.2, -0.6]), 0.15))),
)


def _recourse2():
    def objective(x):
        x = np.asarray(x, dtype=float)
        val = float(_R2_LIN @ x)
        grad = _R2_LIN.copy()
        for weight, options in _R2_SCEN:
            best = None
            best_grad = None
            for center, offset in options:
                diff = x - center
                v = 0.5 * weight * float(diff @ diff) + offset
                if best is None or v < best:
                    best = v
                    best_grad = weight * diff
            val += best
            grad = grad + best_grad
        return val, grad

    def objective_batch(X):
        X = np.asarray(X, dtype=float)
        vals = X @ _R2_LIN
        for weight, options in _R2_SCEN:
            per = np.stack(
                [
                    0.5 * weight * np.sum((X - center) ** 2, axis=1) + offset
                    for center, offset in options
                ],
                axis=1,
            )
            vals = vals + per.min(axis=1)
        return vals

    def constraints(x):
        x = np.asarray(x, dtype=float)
        ce = float(x[0] - x[1] - 0.3)
        cb, Jb = _box_rows(x, (-2.0, 2.0))
        c = np.concatenate([[ce], cb])
        J = np.vstack([np.array([[1.0, -1.0]]), Jb])
        return c, J

    def constraint_batch(X):
        X = np.asarray(X, dtype=float)
        ce = X[:, 0] - X[:, 1] - 0.3
        return np.concatenate([ce[:, None], _box_rows_batch(X, (-2.0, 2.0))], axis=1)

    def hessians(x):
        return np.zeros((5, 2, 2))

    spec = ProblemSpec(
        n=2,
        eq_indices=(0,),
        ineq_indices=(1, 2, 3, 4),
        objective_oracle=objective,
        constraint_oracle=constraints,
        hessian_oracle=hessians,
        rho=2.0,
        lip_h=0.0,
        box=_box((-2.0, 2.0), 2),
        reference=(np.array([0.2, -0.1]), 0.127),
        objective_batch=objective_batch,
        constraint_batch=constraint_batch,
    )
    expected = ReferenceSolution(
        minimizers=(np.array([0.2, -0.1]),),
        objective=0.127,
        note="closed form: with every scenario on its first option the"
        " on-line stationarity condition 4s - 0.8 = 0 gives s = 0.2, i.e."
        " x = (0.2, -0.1); value 0.05 + 0.03 + 0.032 + 0.015; the other"
        " piece regions hold no on-line stationary point",
    )
    return NamedProblem(
        "recourse2",
        spec,
        np.array([0.9, 0.6]),
        expected,
        frozenset({"two-stage", "affine"}),
    )


_BUILDERS = {
    "dc1d": _dc1d,
    "minq2": _minq2,
    "affine-eq": _affine_eq,
    "infeasible-lin": _infeasible_lin,
    "recourse2": _recourse2,
}

CATALOG = tuple(sorted(_BUILDERS))


def catalog():
    """Names of the packaged problems, sorted."""
    return CATALOG


def build(name):
    """Construct a catalog problem by name; CatalogError if unknown."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        known = ", ".join(CATALOG)
        raise CatalogError(f"unknown problem {name!r}; known: {known}") from None
    return builder()


_COARSE_1D = 4001
_COARSE_2D = 401
_ZOOM_SPACINGS = 20.0
_INEQ_SLACK = 1e-9


def _objective_values(spec, X):
    if spec.objective_batch is not None:
        return np.asarray(spec.objective_batch(X), dtype=float)
    return np.array([float(spec.objective_oracle(x)[0]) for x in X])


def _constraint_values(spec, X):
    if spec.m == 0:
        return np.zeros((X.shape[0], 0))
    if spec.constraint_batch is not None:
        return np.asarray(spec.constraint_batch(X), dtype=float)
    return np.array([spec.constraint_oracle(x)[0] for x in X])


def _project_equalities(spec, x):
    # Gauss-Newton least-squares steps onto the equality set
    x = np.asarray(x, dtype=float).copy()
    me = spec.eq_count
    for _ in range(12):
        c, J = spec.constraint_oracle(x)
        ceq = np.asarray(c, dtype=float)[:me]
        if float(np.max(np.abs(ceq))) <= 1e-13:
            break
        step, *_ = np.linalg.lstsq(np.asarray(J, dtype=float)[:me], ceq, rcond=None)
        x -= step
    return x


def _coordinate_refine(spec, x, h):
    x = np.asarray(x, dtype=float).copy()
    lo = spec.box[:, 0]
    hi = spec.box[:, 1]
    me = spec.eq_count

    def along(t, i):
        y = x.copy()
        y[i] = t
        if spec.m > me:
            c = spec.constraint_oracle(y)[0]
            if np.any(np.asarray(c)[me:] < -_INEQ_SLACK):
                return np.inf
        return float(spec.objective_oracle(y)[0])

    for _ in range(3):
        for i in range(spec.n):
            a = max(float(lo[i]), float(x[i]) - 2.0 * h)
            b = min(float(hi[i]), float(x[i]) + 2.0 * h)
            if b <= a:
                continue
            res = minimize_scalar(
                along,
                bounds=(a, b),
                args=(i,),
                method="bounded",
                options={"xatol": 1e-13, "maxiter": 300},
            )
            if res.fun <= along(float(x[i]), i):
                x[i] = float(res.x)
    return x


def _tangent_refine(spec, x, h):
    me = spec.eq_count
    lo = spec.box[:, 0]
    hi = spec.box[:, 1]
    _, J = spec.constraint_oracle(x)
    _, _, vt = np.linalg.svd(np.asarray(J, dtype=float)[:me])
    u = vt[-1]

    def along(t):
        y = _project_equalities(spec, x + t * u)
        y = np.clip(y, lo, hi)
        c = np.asarray(spec.constraint_oracle(y)[0], dtype=float)
        if me and float(np.max(np.abs(c[:me]))) > 1e-9:
            return np.inf
        if np.any(c[me:] < -_INEQ_SLACK):
            return np.inf
        return float(spec.objective_oracle(y)[0])

    for half in (100.0 * h, 10.0 * h, h):
        res = minimize_scalar(
            along,
            bounds=(-half, half),
            method="bounded",
            options={"xatol": 1e-13, "maxiter": 300},
        )
        if np.isfinite(res.fun) and res.fun <= along(0.0):
            x = np.clip(_project_equalities(spec, x + float(res.x) * u), lo, hi)
    return x


def _is_feasible(spec, x):
    if spec.m == 0:
        return True
    c = np.asarray(spec.constraint_oracle(x)[0], dtype=float)
    me = spec.eq_count
    if me and float(np.max(np.abs(c[:me]))) > 1e-9:
        return False
    return not np.any(c[me:] < -_INEQ_SLACK)


def brute_force_reference(spec, resolution=1e-6):
    """Grid-localized minimizer with local polish, independent of the solver.

    Sweeps coarse-to-fine grids over the box, keeping equality rows inside a
    band of ten grid spacings and inequality rows above -1e-9, then polishes
    the winner: equality problems get a least-squares projection plus a
    tangent line search when the equalities leave room; problems without
    equalities get coordinate-wise interval refinement. Grid ties go to the
    lexicographically smallest point. Returns (x, f(x)).
    """
    if spec.box is None:
        raise ContractError("brute_force_reference needs a bounded box")
    if spec.n > 2:
        raise ContractError("brute_force_reference handles n <= 2")
    if not np.isfinite(resolution) or resolution <= 0.0:
        raise ContractError(f"resolution must be positive, got {resolution}")

    lo = spec.box[:, 0].astype(float).copy()
    hi = spec.box[:, 1].astype(float).copy()
    points = _COARSE_1D if spec.n == 1 else _COARSE_2D
    wlo, whi = lo.copy(), hi.copy()
    me = spec.eq_count
    best = None
    h = float(np.max(whi - wlo) / (points - 1))
    for _ in range(60):
        h = float(np.max(whi - wlo) / (points - 1))
        axes = [np.linspace(wlo[i], whi[i], points) for i in range(spec.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.stack([m.reshape(-1) for m in mesh], axis=1)
        C = _constraint_values(spec, X)
        mask = np.ones(X.shape[0], dtype=bool)
        band = 10.0 * max(h, resolution)
        for i in range(me):
            mask &= np.abs(C[:, i]) <= band
        for i in range(me, spec.m):
            mask &= C[:, i] >= -_INEQ_SLACK
        if not mask.any():
            raise ResolutionError(
                f"no feasible grid points at spacing {h:.3e};"
                " refine the resolution or widen the box"
            )
        Xf = X[mask]
        vals = _objective_values(spec, Xf)
        idx = int(np.argmin(vals))
        tie = 64.0 * np.finfo(float).eps * (1.0 + abs(float(vals[idx])))
        close = np.where(vals <= vals[idx] + tie)[0]
        if close.size > 1:
            keys = tuple(Xf[close, i] for i in reversed(range(spec.n)))
            idx = int(close[np.lexsort(keys)[0]])
        best = Xf[idx].copy()
        if h <= resolution:
            break
        half = _ZOOM_SPACINGS * h
        wlo = np.maximum(lo, best - half)
        whi = np.minimum(hi, best + half)

    if me == 0:
        cand = _coordinate_refine(spec, best, h)
    else:
        cand = _project_equalities(spec, best)
        if spec.n - me >= 1:
            cand = _tangent_refine(spec, cand, h)
        cand = _project_equalities(spec, cand)
    cand = np.clip(cand, lo, hi)
    x = cand if _is_feasible(spec, cand) else best
    return x, float(spec.objective_oracle(x)[0])
