"""Line-search SQP for nonsmooth objectives with relaxed subproblems."""

from .analysis import (
    MfcqReport,
    MonitorReport,
    PotentialDescentReport,
    PotentialParams,
    RateFit,
    SubgradientReport,
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
from .driver import (
    CONVERGED,
    LINE_SEARCH_FAILURE,
    MAX_ITERATIONS,
    ORACLE_ERROR,
    QP_STALL,
    FixedB,
    IterationRecord,
    SolverConfig,
    SolveResult,
    TwoPhaseB,
    default_config,
    solve,
    update_B,
)
from .errors import (
    AssemblyError,
    CapabilityError,
    CatalogError,
    ConfigError,
    ContractError,
    DomainError,
    EvaluationError,
    InsufficientDataError,
    LineSearchError,
    NssqpError,
    PremiseError,
    QpNumericalError,
    QpStallError,
    ResolutionError,
)
from .globalization import LineSearchOutcome, line_search, merit, update_penalty
from .library import (
    CATALOG,
    NamedProblem,
    ReferenceSolution,
    brute_force_reference,
    build,
    catalog,
)
from .problems import (
    KktReport,
    LinearizationReport,
    ProblemSpec,
    UpperC2Report,
    constraint_hessians,
    constraint_violation,
    evaluate,
    kkt_residual,
    validate_linearization,
    validate_upper_c2,
)
from .qpsolver import QpSolverSettings, residuals, solve_qp
from .subproblem import (
    ConstraintClassification,
    MultiplierBoundReport,
    QpData,
    QpSolution,
    assemble,
    check_multiplier_bounds,
    classify,
    recover_slack_multipliers,
)
from .traceio import TraceTable, read_trace, trace_columns, write_trace

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "CATALOG",
    "CapabilityError",
    "CatalogError",
    "ConfigError",
    "CONVERGED",
    "ConstraintClassification",
    "ContractError",
    "DomainError",
    "EvaluationError",
    "FixedB",
    "InsufficientDataError",
    "IterationRecord",
    "KktReport",
    "LINE_SEARCH_FAILURE",
    "LineSearchError",
    "LineSearchOutcome",
    "LinearizationReport",
    "MAX_ITERATIONS",
    "MfcqReport",
    "MonitorReport",
    "MultiplierBoundReport",
    "NamedProblem",
    "NssqpError",
    "ORACLE_ERROR",
    "PotentialDescentReport",
    "PotentialParams",
    "PremiseError",
    "ProblemSpec",
    "QP_STALL",
    "QpData",
    "QpNumericalError",
    "QpSolution",
    "QpSolverSettings",
    "QpStallError",
    "RateFit",
    "ReferenceSolution",
    "ResolutionError",
    "SolveResult",
    "SolverConfig",
    "SubgradientReport",
    "TraceTable",
    "TwoPhaseB",
    "UpperC2Report",
    "assemble",
    "brute_force_reference",
    "build",
    "catalog",
    "check_mfcq",
    "check_multiplier_bounds",
    "classify",
    "conjugate_value",
    "constraint_hessians",
    "constraint_violation",
    "default_config",
    "default_potential_params",
    "evaluate",
    "fit_linear_rate",
    "kkt_residual",
    "line_search",
    "merit",
    "monitor_full_step",
    "monitor_merit_decrease",
    "monitor_multiplier_bounds",
    "monitor_potential",
    "monitor_slack_tail",
    "monitor_step_bound",
    "monitor_subgradient",
    "monitor_theta_tail",
    "positive_prefix",
    "potential_descent_check",
    "potential_value",
    "read_trace",
    "recover_slack_multipliers",
    "residuals",
    "solve",
    "solve_qp",
    "subgradient_bound_vector",
    "trace_columns",
    "trace_errors",
    "update_B",
    "update_penalty",
    "validate_linearization",
    "validate_upper_c2",
    "write_trace",
]
