"""Command line interface: solve, validate, rate, and monitor subcommands.

Exit codes: 0 success / all checks pass, 1 bad input or configuration,
2 iteration cap reached, 3 solver failure, 4 validation or monitor failure,
5 trace too short for the requested analysis, 6 diagnostic premises violated.

Config files are flat UTF-8 key=value lines; '#' starts a comment; keys
mirror the command line flags and flags win on conflict.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, plotting, traceio
from .driver import (
    CONVERGED,
    MAX_ITERATIONS,
    FixedB,
    TwoPhaseB,
    default_config,
    solve,
)
from .errors import (
    CapabilityError,
    CatalogError,
    ConfigError,
    ContractError,
    InsufficientDataError,
    NssqpError,
    PremiseError,
)
from .library import build
from .problems import validate_linearization, validate_upper_c2
from .qpsolver import QpSolverSettings

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_MAX_ITER = 2
EXIT_SOLVER = 3
EXIT_CHECK_FAILED = 4
EXIT_SHORT_TRACE = 5
EXIT_PREMISE = 6

_STATUS_EXIT = {CONVERGED: EXIT_OK, MAX_ITERATIONS: EXIT_MAX_ITER}

# every key a config file may carry, with its parser
_CONFIG_KEYS = {
    "problem": str,
    "x0": str,
    "out": str,
    "plot": bool,
    "eps": float,
    "eps_c": float,
    "max_iter": int,
    "theta0": float,
    "gamma": float,
    "eta": float,
    "tau_alpha": float,
    "alpha_min": float,
    "b": float,
    "b_late": float,
    "b_switch": int,
    "qp_tol": float,
    "qp_max_iter": int,
    "sigma": float,
    "ell": float,
    "c_b": float,
    "samples": int,
    "seed": int,
    "rho": float,
    "lip_h": float,
    "tail": int,
}

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


def parse_config_file(path) -> dict:
    """Parse a flat key=value config document."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        kind = _CONFIG_KEYS[key]
        try:
            if kind is bool:
                lowered = value.lower()
                if lowered in _TRUE_WORDS:
                    values[key] = True
                elif lowered in _FALSE_WORDS:
                    values[key] = False
                else:
                    raise ValueError(f"not a boolean: {value!r}")
            else:
                values[key] = kind(value)
        except ValueError as exc:
            raise ConfigError(f"line {line_no}: bad value for {key}: {exc}") from None
    return values


def _merge(args, file_opts: dict) -> dict:
    """Effective options: command line flags override file values."""
    merged = dict(file_opts)
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            merged[key] = flag
    return merged


def _parse_x0(text: str, n: int) -> np.ndarray:
    try:
        values = [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad x0 {text!r}: {exc}") from None
    if len(values) != n:
        raise ConfigError(f"x0 has {len(values)} entries, problem needs {n}")
    return np.array(values)


def _solver_config(spec, opts: dict):
    overrides = {}
    for key in ("eps", "eps_c", "max_iter", "theta0", "gamma", "eta", "tau_alpha", "alpha_min"):
        if opts.get(key) is not None:
            overrides[key] = opts[key]
    if opts.get("qp_tol") is not None or opts.get("qp_max_iter") is not None:
        overrides["qp_settings"] = QpSolverSettings(
            tolerance=opts.get("qp_tol") if opts.get("qp_tol") is not None else 1e-12,
            max_iterations=opts.get("qp_max_iter") or 200,
        )
    if opts.get("b_late") is not None:
        rho = spec.rho if spec.rho is not None else 1.0
        early = opts.get("b") if opts.get("b") is not None else 1.1 * max(1.0, rho)
        switch = opts.get("b_switch") if opts.get("b_switch") is not None else 100
        overrides["b_rule"] = TwoPhaseB(early, opts["b_late"], switch)
    elif opts.get("b") is not None:
        overrides["b_rule"] = FixedB(opts["b"])
    try:
        return default_config(spec, **overrides)
    except ContractError as exc:
        raise ConfigError(str(exc)) from None


def _resolve_problem(args, opts: dict):
    name = args.problem if args.problem is not None else opts.get("problem")
    if not name:
        raise ConfigError("a problem name is required (positional or problem= in config)")
    return name, build(name)


def _run_solve(args, opts: dict):
    name, prob = _resolve_problem(args, opts)
    x0 = prob.x0
    if opts.get("x0") is not None:
        x0 = _parse_x0(opts["x0"], prob.spec.n)
    config = _solver_config(prob.spec, opts)
    result = solve(prob.spec, x0, config)
    return name, prob, config, result


def cmd_solve(args) -> int:
    file_opts = parse_config_file(args.config) if args.config else {}
    opts = _merge(args, file_opts)
    name, prob, config, result = _run_solve(args, opts)
    out = Path(opts.get("out") or f"{name}_trace.csv")
    traceio.write_trace(result.trace, out)
    final = result.final
    print(f"problem:    {name}")
    print(f"status:     {result.status}")
    print(f"iterations: {final.k}")
    print(f"f:          {final.f:.12g}")
    print(f"violation:  {final.v:.6e}")
    print(f"theta:      {final.theta:.6g}")
    print(f"kkt:        stationarity {final.kkt.stationarity:.3e},"
          f" complementarity {final.kkt.complementarity:.3e}")
    print(f"trace:      {out}")
    if opts.get("plot"):
        fig = out.with_suffix(".png")
        ks = [r.k for r in result.trace]
        plotting.save_convergence_figure(
            ks,
            [r.f for r in result.trace],
            [r.v for r in result.trace],
            [r.step_norm for r in result.trace],
            fig,
        )
        print(f"figure:     {fig}")
    return _STATUS_EXIT.get(result.status, EXIT_SOLVER)


def cmd_validate(args) -> int:
    file_opts = parse_config_file(args.config) if args.config else {}
    opts = _merge(args, file_opts)
    name, prob = _resolve_problem(args, opts)
    samples = opts.get("samples") if opts.get("samples") is not None else 1000
    seed = opts.get("seed") if opts.get("seed") is not None else 0
    tol = 1e-10
    all_ok = True

    report = validate_upper_c2(prob.spec, sample_count=samples, seed=seed, rho=opts.get("rho"))
    ok = report.max_violation <= tol
    all_ok &= ok
    print(
        f"upper-c2:      {'PASS' if ok else 'FAIL'} max_violation="
        f"{report.max_violation:.6e} rho={report.rho_used:g}"
    )
    if not ok and report.worst_pair[0] is not None:
        x, y = report.worst_pair
        print(f"  worst pair: x={np.array2string(x, precision=6)}"
              f" y={np.array2string(y, precision=6)}")
        if report.estimated_rho is not None:
            print(f"  estimated rho from samples: {report.estimated_rho:.6g}")

    try:
        lin = validate_linearization(
            prob.spec, sample_count=samples, seed=seed, lip_h=opts.get("lip_h")
        )
        lin_ok = lin.max_violation <= tol
        all_ok &= lin_ok
        print(
            f"linearization: {'PASS' if lin_ok else 'FAIL'} max_violation="
            f"{lin.max_violation:.6e} lip_h={lin.lip_h_used:g}"
        )
        if not lin_ok and lin.worst_pair[0] is not None:
            x, y = lin.worst_pair
            print(f"  worst pair: x={np.array2string(x, precision=6)}"
                  f" y={np.array2string(y, precision=6)}")
    except CapabilityError as exc:
        print(f"linearization: SKIP ({exc})")

    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def cmd_rate(args) -> int:
    table = traceio.read_trace(args.trace)
    points = table.points()
    ks = table.column("k")
    all_errors = np.array([float(np.linalg.norm(row - points[-1])) for row in points])
    prefix = analysis.positive_prefix(all_errors)
    errors = prefix
    if args.tail is not None and args.tail > 0:
        errors = prefix[-args.tail :]
    if errors.size < 3:
        print(f"error: only {errors.size} positive errors in trace; need 3", file=sys.stderr)
        return EXIT_SHORT_TRACE
    offset = prefix.size - errors.size
    fit = analysis.fit_linear_rate(errors)
    print(f"q0:        {fit.q0:.17g}")
    print(f"q1:        {fit.q1:.17g}")
    print(f"r_squared: {fit.r_squared:.17g}")
    if fit.q0 >= 1.0 - 1e-12:
        print("warning: no contraction detected (q0 >= 1)")
    positions = np.arange(errors.size, dtype=float)
    fitted = np.log(fit.q1) + positions * np.log(fit.q0)
    out = Path(args.out) if args.out else Path(args.trace).with_name(
        Path(args.trace).stem + "_rate.csv"
    )
    lines = ["k,error,log_error,fitted_log_error"]
    for i in range(errors.size):
        k_val = int(ks[offset + i])
        lines.append(
            f"{k_val},{format(errors[i], '.17g')},"
            f"{format(float(np.log(errors[i])), '.17g')},"
            f"{format(float(fitted[i]), '.17g')}"
        )
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"rate table: {out}")
    if args.plot:
        fig = out.with_suffix(".png")
        plotting.save_rate_figure(ks[offset : offset + errors.size], errors, fit, fig)
        print(f"figure:     {fig}")
    return EXIT_OK


_MONITOR_NAMES = (
    "multiplier-bounds",
    "merit-decrease",
    "theta-tail",
    "slack-tail",
    "full-step",
    "step-bound",
    "potential",
    "subgradient",
)


def _premise_tail(trace):
    """Longest suffix in the slack-free full-step regime."""
    start = len(trace)
    for i in range(len(trace) - 1, -1, -1):
        rec = trace[i]
        last = i == len(trace) - 1
        ok = rec.slack_max <= 1e-8 and (
            rec.alpha == 1.0 or (last and rec.alpha == 0.0)
        )
        if not ok:
            break
        start = i
    return trace[start:]


def _potential_params(spec, opts: dict, result):
    sigma, ell = opts.get("sigma"), opts.get("ell")
    if (sigma is None) != (ell is None):
        raise ConfigError("sigma and ell must be given together")
    if sigma is not None:
        kwargs = {"sigma": sigma, "ell": ell}
        if opts.get("c_b") is not None:
            kwargs["c_b"] = opts["c_b"]
        try:
            return analysis.PotentialParams(**kwargs)
        except ContractError as exc:
            raise ConfigError(str(exc)) from None
    b_tail = result.trace[-1].b
    theta_bar = result.trace[-1].theta
    return analysis.default_potential_params(spec, b_tail, theta_bar=theta_bar)


def cmd_monitor(args) -> int:
    file_opts = parse_config_file(args.config) if args.config else {}
    opts = _merge(args, file_opts)
    selected = [
        name
        for name in _MONITOR_NAMES
        if getattr(args, name.replace("-", "_"), False)
    ]
    explicit = set(selected)
    if args.all:
        selected = list(_MONITOR_NAMES)
    if not selected:
        raise ConfigError("select at least one monitor or pass --all")

    name, prob, config, result = _run_solve(args, opts)
    print(f"problem: {name} status: {result.status} iterations: {result.final.k}")
    spec = prob.spec
    trace = result.trace
    failures = 0
    for mon in selected:
        try:
            if mon == "multiplier-bounds":
                rep = analysis.monitor_multiplier_bounds(trace, spec, theta0=config.theta0)
            elif mon == "merit-decrease":
                rep = analysis.monitor_merit_decrease(trace, spec, eta=config.eta)
            elif mon == "theta-tail":
                rep = analysis.monitor_theta_tail(trace)
            elif mon == "slack-tail":
                rep = analysis.monitor_slack_tail(trace)
            elif mon == "full-step":
                rep = analysis.monitor_full_step(trace, spec)
            elif mon == "step-bound":
                rep = analysis.monitor_step_bound(trace, spec, tau_alpha=config.tau_alpha)
            elif mon == "potential":
                params = _potential_params(spec, opts, result)
                rep = analysis.monitor_potential(_premise_tail(trace), spec, params)
            else:
                params = _potential_params(spec, opts, result)
                rep = analysis.monitor_subgradient(_premise_tail(trace), spec, params)
        except PremiseError as exc:
            if mon in explicit:
                print(f"{mon}: PREMISE VIOLATED: {exc}")
                return EXIT_PREMISE
            print(f"{mon}: SKIP (premise: {exc})")
            continue
        except (InsufficientDataError, CapabilityError) as exc:
            if mon in explicit:
                print(f"{mon}: UNAVAILABLE: {exc}", file=sys.stderr)
                return EXIT_SHORT_TRACE
            print(f"{mon}: SKIP ({exc})")
            continue
        verdict = "PASS" if rep.passed else "FAIL"
        print(f"{mon}: {verdict} margin={rep.margin:+.6e} ({rep.detail})")
        if not rep.passed:
            failures += 1
    return EXIT_OK if failures == 0 else EXIT_CHECK_FAILED


def _add_solver_options(parser) -> None:
    parser.add_argument("--x0", help="comma-separated start point override")
    parser.add_argument("--eps", type=float, help="step-norm stopping tolerance")
    parser.add_argument("--eps-c", dest="eps_c", type=float, help="violation stopping tolerance")
    parser.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap")
    parser.add_argument("--theta0", type=float, help="initial penalty weight")
    parser.add_argument("--gamma", type=float, help="penalty growth margin")
    parser.add_argument("--eta", type=float, help="sufficient-decrease fraction")
    parser.add_argument("--tau-alpha", dest="tau_alpha", type=float, help="backtracking factor")
    parser.add_argument("--alpha-min", dest="alpha_min", type=float, help="smallest trial step")
    parser.add_argument("--b", type=float, help="curvature weight (fixed rule)")
    parser.add_argument("--b-late", dest="b_late", type=float, help="late-phase curvature weight")
    parser.add_argument("--b-switch", dest="b_switch", type=int, help="iteration to switch weights")
    parser.add_argument("--qp-tol", dest="qp_tol", type=float, help="subproblem solver tolerance")
    parser.add_argument("--qp-max-iter", dest="qp_max_iter", type=int, help="subproblem iteration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nssqp",
        description="Line-search SQP for nonsmooth objectives with relaxed subproblems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the solver on a catalog problem")
    p_solve.add_argument("problem", nargs="?", help="catalog problem name")
    p_solve.add_argument("--config", help="key=value config file")
    p_solve.add_argument("--out", help="trace CSV path")
    p_solve.add_argument("--plot", action="store_true", default=None,
                         help="also render convergence figures next to the trace")
    _add_solver_options(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_val = sub.add_parser("validate", help="sample-check the declared oracle bounds")
    p_val.add_argument("problem", nargs="?", help="catalog problem name")
    p_val.add_argument("--config", help="key=value config file")
    p_val.add_argument("--samples", type=int, help="sample pair count")
    p_val.add_argument("--seed", type=int, help="sampling seed")
    p_val.add_argument("--rho", type=float, help="override the declared curvature modulus")
    p_val.add_argument("--lip-h", dest="lip_h", type=float,
                       help="override the declared constraint curvature bound")
    p_val.set_defaults(func=cmd_validate)

    p_rate = sub.add_parser("rate", help="fit a geometric rate to a trace CSV")
    p_rate.add_argument("trace", help="trace CSV written by solve")
    p_rate.add_argument("--tail", type=int, help="fit only the last N positive errors")
    p_rate.add_argument("--out", help="rate table CSV path")
    p_rate.add_argument("--plot", action="store_true", default=None,
                        help="render the log-error figure next to the table")
    p_rate.set_defaults(func=cmd_rate)

    p_mon = sub.add_parser("monitor", help="re-run a problem and check invariants")
    p_mon.add_argument("problem", nargs="?", help="catalog problem name")
    p_mon.add_argument("--config", help="key=value config file")
    p_mon.add_argument("--all", action="store_true",
                       help="run every monitor, skipping premise-inapplicable ones")
    for mon in _MONITOR_NAMES:
        p_mon.add_argument(f"--{mon}", dest=mon.replace("-", "_"),
                           action="store_true", help=f"run the {mon} monitor")
    p_mon.add_argument("--sigma", type=float, help="potential moderation weight")
    p_mon.add_argument("--ell", type=float, help="potential proximal weight")
    p_mon.add_argument("--c-b", dest="c_b", type=float,
                       help="penalty-curvature fraction for nonlinear premises")
    _add_solver_options(p_mon)
    p_mon.set_defaults(func=cmd_monitor)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CatalogError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except PremiseError as exc:
        print(f"premise violated: {exc}", file=sys.stderr)
        return EXIT_PREMISE
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHORT_TRACE
    except NssqpError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
