"""Dense primal-dual interior-point solver for the relaxed subproblem.

The relaxed QP is rewritten over the stacked variable z = (d, v, w, t):

    minimize    (1/2) z'Qz + q'z
    subject to  A z = b          (equality rows with their elastic split)
                G z >= h         (relaxed inequality rows and slack bounds),

with Q = blockdiag(B, eps * I) where eps is a tiny regularization on the
slack block, A = [J_E, -I, I, 0], b = -c_E, and G stacking the relaxed
inequality rows [J_I, 0, 0, I] >= -c_I with the bounds v, w, t >= 0.

The iteration is Mehrotra predictor-corrector: an affine scaling step sets
the centering weight, a corrected step follows, and separate primal/dual
step sizes keep (s, lambda) strictly positive. Convergence is declared when
every KKT block residual falls below tolerance * (1 + ||g||_inf + theta),
with the scaling capped at 10x so the absolute block-residual guarantee
(10 * tolerance) holds regardless of data scale.

The elastic split makes the equality block [J_E, -I, I, 0] full row rank for
any J_E, so the Newton systems are nonsingular without rank assumptions.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ContractError, QpNumericalError, QpStallError
from .subproblem import QpData, QpSolution, recover_slack_multipliers

KktBlocks = namedtuple("KktBlocks", ["stationarity", "primal", "complementarity"])


@dataclass(frozen=True)
class QpSolverSettings:
    """Interior-point settings.

    tolerance       per-block residual target (relative, capped; see module doc)
    max_iterations  iteration cap before QpStallError
    regularization  diagonal shift added to the slack block of Q
    """

    tolerance: float = 1e-10
    max_iterations: int = 200
    regularization: float = 1e-12

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iterations < 1 or self.regularization < 0:
            raise ContractError("bad solver settings")


def _standard_form(qp: QpData, eps: float):
    n, me, mi = qp.n, qp.eq_count, qp.ineq_count
    N = n + 2 * me + mi
    Q = np.zeros((N, N))
    Q[:n, :n] = qp.B
    if N > n:
        Q[n:, n:] = eps * np.eye(N - n)
    qvec = np.concatenate([qp.g, qp.theta * np.ones(N - n)])

    c_eq, c_in = qp.c[:me], qp.c[me:]
    J_eq, J_in = qp.J[:me], qp.J[me:]

    A = np.zeros((me, N))
    A[:, :n] = J_eq
    A[:, n : n + me] = -np.eye(me)
    A[:, n + me : n + 2 * me] = np.eye(me)
    b = -c_eq

    mG = mi + 2 * me + mi
    G = np.zeros((mG, N))
    h = np.zeros(mG)
    G[:mi, :n] = J_in
    G[:mi, n + 2 * me :] = np.eye(mi)
    h[:mi] = -c_in
    G[mi : mi + 2 * me, n : n + 2 * me] = np.eye(2 * me)
    G[mi + 2 * me :, n + 2 * me :] = np.eye(mi)
    return Q, qvec, A, b, G, h


def _max_step(u: np.ndarray, du: np.ndarray) -> float:
    neg = du < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-u[neg] / du[neg])))


def _blocks(qp, Q, qvec, A, b, G, h, z, y, lam):
    """True residual blocks of the (regularized) standard-form KKT system."""
    r_stat = Q @ z + qvec - A.T @ y - G.T @ lam
    stat = float(np.max(np.abs(r_stat), initial=0.0))
    pri = float(np.max(np.abs(A @ z - b), initial=0.0))
    s_true = G @ z - h
    pri = max(pri, float(np.max(-s_true, initial=0.0)))
    comp = float(np.max(np.abs(lam * s_true), initial=0.0))
    return stat, pri, comp


def _build_solution(qp: QpData, z, y, lam, iterations, status) -> QpSolution:
    n, me, mi = qp.n, qp.eq_count, qp.ineq_count
    d = z[:n].copy()
    v = z[n : n + me].copy()
    w = z[n + me : n + 2 * me].copy()
    t = z[n + 2 * me :].copy()
    lam_rows = np.concatenate([y, lam[:mi]]) if (me + mi) else np.zeros(0)
    p, q, r = recover_slack_multipliers(lam_rows, qp.theta, me)
    obj = float(0.5 * d @ qp.B @ d + qp.g @ d + qp.theta * (v.sum() + w.sum() + t.sum()))
    return QpSolution(
        d=d, v=v, w=w, t=t, lam=lam_rows, p=p, q=q, r=r,
        qp_objective=obj, solve_status=status, iterations=iterations,
    )


def solve_qp(qp: QpData, settings: QpSolverSettings | None = None) -> QpSolution:
    """Solve the relaxed subproblem.

    Returns a QpSolution whose residual blocks (see residuals) are below
    10 * settings.tolerance. Unconstrained instances reduce to one dense
    solve of B d = -g.

    Raises
    ------
    QpStallError
        Iteration cap reached above tolerance; carries the best iterate.
    QpNumericalError
        Non-finite iterate or singular Newton system.
    """
    if settings is None:
        settings = QpSolverSettings()
    n, me, mi = qp.n, qp.eq_count, qp.ineq_count

    if me == 0 and mi == 0:
        try:
            d = np.linalg.solve(qp.B, -qp.g)
        except np.linalg.LinAlgError as exc:
            raise QpNumericalError(f"singular curvature matrix: {exc}") from exc
        return _build_solution(qp, d, np.zeros(0), np.zeros(0), 0, "optimal")

    Q, qvec, A, b, G, h = _standard_form(qp, settings.regularization)
    N, mG = Q.shape[0], G.shape[0]

    # well-centered start: zero step, unit-or-residual slacks, theta/2 duals
    c_eq, c_in = qp.c[:me], qp.c[me:]
    z = np.concatenate([
        np.zeros(n),
        np.maximum(np.abs(c_eq), 1.0),
        np.maximum(np.abs(c_eq), 1.0),
        np.maximum(np.abs(c_in), 1.0),
    ])
    s = np.maximum(G @ z - h, 1.0)
    lam = np.full(mG, 0.5 * qp.theta)
    y = np.zeros(me)

    scale = 1.0 + float(np.max(np.abs(qp.g), initial=0.0)) + qp.theta
    threshold = settings.tolerance * float(np.clip(scale, 1.0, 10.0))

    best = None
    best_res = np.inf
    it = 0
    for it in range(settings.max_iterations):
        stat, pri, comp = _blocks(qp, Q, qvec, A, b, G, h, z, y, lam)
        res = max(stat, pri, comp)
        if res < best_res:
            best_res = res
            best = (z.copy(), y.copy(), lam.copy())
        if res <= threshold:
            return _build_solution(qp, z, y, lam, it, "optimal")

        r_d = Q @ z + qvec - A.T @ y - G.T @ lam
        r_p = A @ z - b
        r_g = G @ z - s - h
        mu = float(s @ lam) / mG

        W = lam / s
        K = np.zeros((N + me, N + me))
        K[:N, :N] = Q + (G.T * W) @ G
        K[:N, N:] = A.T
        K[N:, :N] = A
        try:
            lu = lu_factor(K)
        except Exception as exc:  # LinAlgError or ValueError on nan
            raise QpNumericalError(f"Newton system factorization failed: {exc}") from exc

        def solve_step(r_c):
            rhs = np.concatenate([-r_d - G.T @ (W * r_g + r_c / s), -r_p])
            sol = lu_solve(lu, rhs)
            dz, dy = sol[:N], -sol[N:]
            dlam = -W * (r_g + G @ dz) - r_c / s
            ds = -(r_c + s * dlam) / lam
            return dz, dy, dlam, ds

        # predictor
        dz_a, dy_a, dlam_a, ds_a = solve_step(lam * s)
        a_p = _max_step(s, ds_a)
        a_d = _max_step(lam, dlam_a)
        mu_aff = float((s + a_p * ds_a) @ (lam + a_d * dlam_a)) / mG
        sigma = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0)) if mu > 0 else 0.0

        # corrector with centering
        r_c = lam * s + ds_a * dlam_a - sigma * mu
        dz, dy, dlam, ds = solve_step(r_c)

        tau = min(0.99995, max(0.99, 1.0 - 10.0 * mu))
        a_p = min(1.0, tau * _max_step(s, ds))
        a_d = min(1.0, tau * _max_step(lam, dlam))
        z += a_p * dz
        s += a_p * ds
        y += a_d * dy
        lam += a_d * dlam
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(s)) and np.all(np.isfinite(lam))):
            raise QpNumericalError("non-finite interior-point iterate")

    zb, yb, lb = best
    sol = _build_solution(qp, zb, yb, lb, settings.max_iterations, "stalled")
    raise QpStallError(
        f"interior point stalled at residual {best_res:.3e} after "
        f"{settings.max_iterations} iterations",
        best=sol,
        residual=best_res,
    )


def residuals(qp: QpData, sol: QpSolution) -> KktBlocks:
    """Recompute KKT block residuals from (qp, sol) alone.

    Independent of the solver internals and of its slack regularization.
    stationarity is the max-norm residual of g + Bd - J'lam; primal collects
    elastic equality rows, relaxed inequality rows and slack nonnegativity;
    complementarity collects the slack products together with the sign
    conditions on the recovered bound multipliers.
    """
    me, mi = qp.eq_count, qp.ineq_count
    d, v, w, t = sol.d, sol.v, sol.w, sol.t
    lam_eq, lam_in = sol.lam[:me], sol.lam[me:]
    J_eq, J_in = qp.J[:me], qp.J[me:]
    c_eq, c_in = qp.c[:me], qp.c[me:]

    r_stat = qp.g + qp.B @ d - qp.J.T @ sol.lam
    stat = float(np.max(np.abs(r_stat), initial=0.0))

    primal_parts = [0.0]
    if me:
        primal_parts.append(np.max(np.abs(c_eq + J_eq @ d - v + w)))
        primal_parts.append(np.max(np.maximum(0.0, -v)))
        primal_parts.append(np.max(np.maximum(0.0, -w)))
    if mi:
        primal_parts.append(np.max(np.maximum(0.0, -(c_in + J_in @ d + t))))
        primal_parts.append(np.max(np.maximum(0.0, -t)))
    primal = float(max(primal_parts))

    comp_parts = [0.0]
    if me:
        comp_parts.append(np.max(np.abs(sol.p * v)))
        comp_parts.append(np.max(np.abs(sol.q * w)))
        comp_parts.append(np.max(np.maximum(0.0, -sol.p)))
        comp_parts.append(np.max(np.maximum(0.0, -sol.q)))
    if mi:
        comp_parts.append(np.max(np.abs(lam_in * (c_in + J_in @ d + t))))
        comp_parts.append(np.max(np.abs(sol.r * t)))
        comp_parts.append(np.max(np.maximum(0.0, -lam_in)))
        comp_parts.append(np.max(np.maximum(0.0, -sol.r)))
    comp = float(max(comp_parts))
    return KktBlocks(stat, primal, comp)
