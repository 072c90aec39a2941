"""Conjugate grids, potential descent, subgradient bounds, rate fits, MFCQ, monitors."""

import dataclasses

import numpy as np
import pytest

from nssqp import analysis
from nssqp.analysis import (
    PotentialParams,
    check_mfcq,
    conjugate_value,
    default_potential_params,
    fit_linear_rate,
    monitor_full_step,
    monitor_merit_decrease,
    monitor_multiplier_bounds,
    monitor_potential,
    monitor_slack_tail,
    monitor_step_bound,
    monitor_subgradient,
    monitor_theta_tail,
    positive_prefix,
    potential_descent_check,
    potential_value,
    subgradient_bound_vector,
    trace_errors,
)
from nssqp.driver import FixedB, default_config, solve
from nssqp.errors import (
    CapabilityError,
    ContractError,
    InsufficientDataError,
    PremiseError,
)
from nssqp.library import CATALOG, build
from nssqp.problems import ProblemSpec

DEFAULT_RUNS = {}
B4_RUNS = {}


def run_default(name):
    if name not in DEFAULT_RUNS:
        prob = build(name)
        DEFAULT_RUNS[name] = (prob, solve(prob.spec, prob.x0, default_config(prob.spec)))
    return DEFAULT_RUNS[name]


def run_b4(name):
    if name not in B4_RUNS:
        prob = build(name)
        config = default_config(prob.spec, b_rule=FixedB(4.0))
        B4_RUNS[name] = (prob, solve(prob.spec, prob.x0, config))
    return B4_RUNS[name]


def slack_free_tail(trace):
    """Longest suffix with vanished slacks and full steps."""
    start = len(trace)
    for i in range(len(trace) - 1, -1, -1):
        rec = trace[i]
        last = i == len(trace) - 1
        if rec.slack_max > 1e-8 or not (rec.alpha == 1.0 or (last and rec.alpha == 0.0)):
            break
        start = i
    return trace[start:]


def zero_objective_spec(box, n=1):
    def objective(x):
        return 0.0, np.zeros(n)

    def batch(X):
        return np.zeros(len(X))

    return ProblemSpec(
        n=n,
        eq_indices=(),
        ineq_indices=(),
        objective_oracle=objective,
        constraint_oracle=None,
        hessian_oracle=None,
        rho=0.0,
        lip_h=0.0,
        box=np.array(box, dtype=float),
        objective_batch=batch,
    )


def test_conjugate_zero_objective():
    # F(x) = x^2/2 on [-1, 1]: interior max at y=0.5, boundary max at y=2
    spec = zero_objective_spec([[-1.0, 1.0]])
    params = PotentialParams(sigma=1.0, ell=1.0)
    assert conjugate_value(spec, params, np.array([0.5])) == pytest.approx(0.125, abs=1e-6)
    assert conjugate_value(spec, params, np.array([2.0])) == pytest.approx(1.5, abs=1e-6)


def test_conjugate_dc1d_against_dense_grid():
    spec = build("dc1d").spec
    params = PotentialParams(sigma=3.0, ell=2.0)
    xs = np.linspace(-2.0, 2.0, 1_000_001)
    F = 0.5 * 3.0 * xs * xs - (xs * xs - np.abs(xs))
    for y in (0.0, 1.0, -2.0, 3.5):
        dense = float(np.max(y * xs - F))
        got = conjugate_value(spec, params, np.array([y]))
        assert got == pytest.approx(dense, abs=1e-4), y


def test_conjugate_needs_small_dimension():
    spec = zero_objective_spec([[-1.0, 1.0]] * 3, n=3)
    params = PotentialParams(sigma=1.0, ell=1.0)
    with pytest.raises(CapabilityError):
        conjugate_value(spec, params, np.zeros(3))


def test_conjugate_requires_sigma_above_rho():
    spec = build("dc1d").spec  # rho = 2
    params = PotentialParams(sigma=1.5, ell=1.0)
    with pytest.raises(PremiseError):
        conjugate_value(spec, params, np.array([0.0]))


def test_potential_value_balances_to_zero():
    spec = zero_objective_spec([[-1.0, 1.0]])
    params = PotentialParams(sigma=1.0, ell=1.0)
    point = np.array([0.3])
    val = potential_value(spec, params, point, point, point)
    assert val == pytest.approx(0.0, abs=1e-6)


def test_potential_value_infeasible_linearization():
    spec = build("minq2").spec
    params = PotentialParams(sigma=3.0, ell=2.0)
    w = np.array([0.0, 0.0])  # equality row reads -0.2 here
    assert potential_value(spec, params, w, np.zeros(2), w) == np.inf


def test_params_validation():
    with pytest.raises(ContractError):
        PotentialParams(sigma=float("nan"), ell=1.0)
    with pytest.raises(ContractError):
        PotentialParams(sigma=1.0, ell=0.0)
    with pytest.raises(ContractError):
        PotentialParams(sigma=1.0, ell=1.0, c_b=1.0)


def test_default_params_affine():
    spec = build("dc1d").spec
    params = default_potential_params(spec, 4.0)
    assert params.sigma == 3.0
    assert params.ell == 4.0


def test_default_params_nonlinear_premises_fail_at_defaults():
    prob = build("infeasible-lin")
    with pytest.raises(PremiseError):
        default_potential_params(prob.spec, 1.1, theta_bar=1.01)


def test_potential_descent_dc1d_tail():
    _, result = run_b4("dc1d")
    params = PotentialParams(sigma=3.0, ell=2.0)
    tail = slack_free_tail(result.trace)
    report = potential_descent_check(tail, build("dc1d").spec, params)
    assert report.min_margin >= -1e-4
    assert len(report.differences) == len(report.values) - 1
    # drops should be genuine decreases almost everywhere, not grid noise
    assert np.median(report.differences) > 0.0


def test_potential_descent_minq2_tail():
    prob, result = run_b4("minq2")
    params = PotentialParams(sigma=3.0, ell=2.0)
    tail = slack_free_tail(result.trace)
    report = potential_descent_check(tail, prob.spec, params)
    assert report.min_margin >= -1e-4


def test_potential_descent_premise_violation():
    prob, result = run_default("dc1d")  # b = 2.2 < sigma = 3
    params = PotentialParams(sigma=3.0, ell=2.0)
    with pytest.raises(PremiseError):
        potential_descent_check(result.trace, prob.spec, params)


def test_potential_descent_needs_data():
    prob, result = run_b4("dc1d")
    params = PotentialParams(sigma=3.0, ell=2.0)
    with pytest.raises(InsufficientDataError):
        potential_descent_check(result.trace[:2], prob.spec, params)


def test_subgradient_closed_form_ratio():
    # with B = b*I and affine rows the element norm is sqrt((sigma-b)^2+1+ell^2)
    prob, result = run_b4("dc1d")
    params = PotentialParams(sigma=3.0, ell=2.0)
    tail = slack_free_tail(result.trace)
    B = np.array([[4.0]])
    expected = np.sqrt((3.0 - 4.0) ** 2 + 1.0 + 2.0**2)
    for rec, nxt in zip(tail[:3], tail[1:4]):
        rep = subgradient_bound_vector(prob.spec, rec, nxt, B, params)
        assert rep.norm_ratio == pytest.approx(expected, abs=1e-9)
        assert abs(rep.fenchel_gap) <= 1e-4
        assert rep.vector.shape == (3,)


def test_subgradient_zero_step():
    prob, result = run_b4("dc1d")
    params = PotentialParams(sigma=3.0, ell=2.0)
    rec = result.trace[0]
    frozen = dataclasses.replace(result.trace[1], x=rec.x.copy())
    rep = subgradient_bound_vector(prob.spec, rec, frozen, np.array([[4.0]]), params)
    assert rep.norm_ratio == 0.0
    assert not rep.vector.any()


def test_subgradient_requires_step():
    prob, result = run_b4("dc1d")
    params = PotentialParams(sigma=3.0, ell=2.0)
    final = result.trace[-1]  # alpha = 0 on the converged record
    with pytest.raises(ContractError):
        subgradient_bound_vector(prob.spec, final, final, np.array([[4.0]]), params)


def test_fit_linear_rate_geometric():
    errors = 2.0 * 0.5 ** np.arange(10)
    fit = fit_linear_rate(errors)
    assert fit.q0 == pytest.approx(0.5, abs=1e-12)
    assert fit.q1 == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_linear_rate_constant():
    fit = fit_linear_rate(np.full(5, 0.7))
    assert fit.q0 == pytest.approx(1.0, abs=1e-12)
    assert fit.r_squared == 1.0


def test_fit_linear_rate_guards():
    with pytest.raises(InsufficientDataError):
        fit_linear_rate([1.0, 0.5])
    with pytest.raises(ContractError):
        fit_linear_rate([1.0, 0.0, 0.1])
    with pytest.raises(ContractError):
        fit_linear_rate([1.0, float("inf"), 0.1])


def test_trace_errors_and_prefix():
    _, result = run_default("dc1d")
    errors = trace_errors(result.trace)
    assert errors.shape == (len(result.trace),)
    assert errors[-1] == 0.0
    prefix = positive_prefix(errors)
    assert prefix.size == len(result.trace) - 1
    assert np.all(prefix > 0.0)
    fit = fit_linear_rate(prefix)
    assert fit.q0 < 1.0
    assert fit.r_squared >= 0.9


def test_mfcq_single_equality_witness():
    prob, result = run_default("minq2")
    rep = check_mfcq(prob.spec, result.final.x)
    assert rep.holds
    # no active inequalities: witness spans the null space of (1, 1)
    assert rep.witness[0] == pytest.approx(1 / np.sqrt(2), abs=1e-9)
    assert rep.witness[1] == pytest.approx(-1 / np.sqrt(2), abs=1e-9)


def test_mfcq_equalities_pin_everything():
    prob, result = run_default("affine-eq")
    rep = check_mfcq(prob.spec, result.final.x)
    assert rep.holds
    assert not rep.witness.any()


def test_mfcq_duplicate_gradients_fail():
    def objective(x):
        return float(x @ x), 2.0 * np.asarray(x)

    def constraints(x):
        c = np.array([x[0] + x[1], 2.0 * (x[0] + x[1])])
        J = np.array([[1.0, 1.0], [2.0, 2.0]])
        return c, J

    spec = ProblemSpec(
        n=2,
        eq_indices=(0, 1),
        ineq_indices=(),
        objective_oracle=objective,
        constraint_oracle=constraints,
        hessian_oracle=None,
        rho=2.0,
        lip_h=0.0,
        box=np.array([[-1.0, 1.0], [-1.0, 1.0]]),
    )
    rep = check_mfcq(spec, np.zeros(2))
    assert not rep.holds


def test_mfcq_active_inequality():
    prob = build("dc1d")
    rep = check_mfcq(prob.spec, np.array([-2.0]))
    assert rep.holds
    # the witness must strictly enter the feasible side of the active row
    assert rep.witness[0] >= 0.99


def test_mfcq_rejects_infeasible_point():
    prob = build("minq2")
    with pytest.raises(ContractError):
        check_mfcq(prob.spec, np.array([0.0, 0.0]))


def test_mfcq_unconstrained():
    spec = zero_objective_spec([[-1.0, 1.0]])
    rep = check_mfcq(spec, np.array([0.2]))
    assert rep.holds


def test_monitor_multiplier_bounds_catalog():
    for name in CATALOG:
        prob, result = run_default(name)
        rep = monitor_multiplier_bounds(result.trace, prob.spec)
        assert rep.passed, (name, rep.detail)


def test_monitor_merit_decrease_catalog():
    for name in CATALOG:
        prob, result = run_default(name)
        rep = monitor_merit_decrease(result.trace, prob.spec)
        assert rep.passed, (name, rep.detail)
        assert rep.margin >= -1e-12


def test_monitor_theta_tail_catalog():
    for name in CATALOG:
        _, result = run_default(name)
        rep = monitor_theta_tail(result.trace)
        assert rep.passed, name


def test_monitor_slack_tail_catalog():
    for name in CATALOG:
        _, result = run_default(name)
        rep = monitor_slack_tail(result.trace)
        assert rep.passed, name


def test_monitor_full_step_affine():
    for name in ("dc1d", "minq2", "affine-eq", "recourse2"):
        prob, result = run_default(name)
        rep = monitor_full_step(result.trace, prob.spec)
        assert rep.passed, name


def test_monitor_full_step_rejects_curved_constraints():
    prob, result = run_default("infeasible-lin")
    with pytest.raises(PremiseError):
        monitor_full_step(result.trace, prob.spec)


def test_monitor_step_bound_catalog():
    for name in CATALOG:
        prob, result = run_default(name)
        rep = monitor_step_bound(result.trace, prob.spec)
        assert rep.passed, name


def test_monitor_potential_and_subgradient():
    for name in ("dc1d", "minq2"):
        prob, result = run_b4(name)
        params = PotentialParams(sigma=3.0, ell=2.0)
        tail = slack_free_tail(result.trace)
        pot = monitor_potential(tail, prob.spec, params)
        assert pot.passed, (name, pot.detail)
        assert pot.margin >= -1e-4
        sub = monitor_subgradient(tail, prob.spec, params)
        assert sub.passed, (name, sub.detail)
