"""Exact-penalty merit function, backtracking line search, penalty update.

The merit function is phi(x, theta) = f(x) + theta * v(x) with v the
aggregate constraint violation. A step d earns acceptance at the first
alpha in {1, tau_alpha, tau_alpha^2, ...} satisfying

    phi(x, theta) - phi(x + alpha d, theta) >= eta * alpha * (1/2) d'Bd.

Trial points outside the box and oracle failures at trial points count as
rejections (the search backtracks past them); the search fails only when
alpha would drop below alpha_min.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, EvaluationError, LineSearchError
from .problems import ProblemSpec, constraint_violation, evaluate


@dataclass(frozen=True)
class LineSearchOutcome:
    """Accepted step data.

    alpha is an exact power of tau_alpha (tau_alpha ** trials); trials counts
    the rejected step sizes before acceptance. model_decrease is (1/2) d'Bd.
    """

    alpha: float
    trials: int
    achieved_decrease: float
    model_decrease: float


def merit(spec: ProblemSpec, x: np.ndarray, theta: float) -> float:
    """phi(x, theta) = f(x) + theta * v(x). Oracle errors propagate."""
    if theta < 0:
        raise ContractError("theta must be nonnegative")
    f, _, c, _ = evaluate(spec, x)
    return f + theta * constraint_violation(spec, c)


def _trial_merit(spec: ProblemSpec, x: np.ndarray, theta: float):
    """Merit at a trial point, or None when the point must be rejected."""
    try:
        return merit(spec, x, theta)
    except (DomainError, EvaluationError):
        return None


def line_search(
    spec: ProblemSpec,
    x: np.ndarray,
    d: np.ndarray,
    theta: float,
    B: np.ndarray,
    eta: float = 0.1,
    tau_alpha: float = 0.5,
    alpha_min: float = 1e-12,
) -> LineSearchOutcome:
    """Backtrack from alpha = 1 until the sufficient-decrease test holds.

    The merit at the base point is evaluated once and reused across trials.
    Raises LineSearchError when every alpha >= alpha_min is rejected, and
    ContractError for d = 0 or parameters outside their ranges.
    """
    d = np.asarray(d, dtype=float).reshape(-1)
    if not np.any(d):
        raise ContractError("line search requires a nonzero step")
    if not (0.0 < eta < 1.0) or not (0.0 < tau_alpha < 1.0) or alpha_min <= 0.0:
        raise ContractError("eta and tau_alpha must lie in (0, 1), alpha_min > 0")

    base = merit(spec, x, theta)
    model = 0.5 * float(d @ np.asarray(B, dtype=float) @ d)

    trials = 0
    while True:
        alpha = tau_alpha**trials
        if alpha < alpha_min:
            raise LineSearchError(
                f"no acceptable step above alpha_min={alpha_min:g} "
                f"(base merit {base:.6g}, model decrease {model:.6g})"
            )
        trial = _trial_merit(spec, x + alpha * d, theta)
        if trial is not None:
            achieved = base - trial
            if achieved >= eta * alpha * model:
                return LineSearchOutcome(
                    alpha=alpha,
                    trials=trials,
                    achieved_decrease=achieved,
                    model_decrease=model,
                )
        trials += 1


def update_penalty(theta: float, lam: np.ndarray, gamma: float = 1e-2) -> float:
    """Return max(theta, ||lam||_inf + gamma).

    Keeps the penalty weight at least gamma above the latest multipliers, so
    the merit function stays exact for the current subproblem; never
    decreases theta. An empty multiplier vector contributes norm 0.
    """
    if gamma <= 0:
        raise ContractError("gamma must be positive")
    lam = np.asarray(lam, dtype=float).reshape(-1)
    lam_norm = float(np.max(np.abs(lam), initial=0.0))
    return max(float(theta), lam_norm + gamma)
