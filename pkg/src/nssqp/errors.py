"""Exception types shared across the solver stack.

Every error raised by this package derives from :class:`NssqpError`, so callers
can catch one base class at the CLI boundary and map it to an exit code.
"""

from __future__ import annotations


class NssqpError(Exception):
    """Base class for all package errors."""


class ContractError(NssqpError):
    """A caller violated an interface precondition (shapes, ranges, kinds)."""


class DomainError(NssqpError):
    """A point lies outside the declared box domain."""


class EvaluationError(NssqpError):
    """An oracle returned a non-finite value or malformed output."""


class CapabilityError(NssqpError):
    """A problem lacks an optional oracle required by the requested operation."""


class AssemblyError(NssqpError):
    """Subproblem data failed validation (non-finite entries, bad curvature)."""


class QpNumericalError(NssqpError):
    """The QP solver hit a non-finite iterate or a singular linear system."""


class QpStallError(NssqpError):
    """The QP solver exhausted its iteration cap above tolerance.

    Carries the best iterate found so diagnostics can inspect it.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class LineSearchError(NssqpError):
    """Backtracking reached the minimum step size without sufficient decrease."""


class InsufficientDataError(NssqpError):
    """A trace is too short for the requested fit or monitor."""


class PremiseError(NssqpError):
    """Monitor parameters violate the premises of the inequality being checked.

    The message names the violated inequality with the offending values.
    """


class CatalogError(NssqpError):
    """Unknown problem name requested from the library."""


class ResolutionError(NssqpError):
    """A reference grid at the requested resolution has no feasible points."""


class ConfigError(NssqpError):
    """A run configuration file or flag set is malformed."""
