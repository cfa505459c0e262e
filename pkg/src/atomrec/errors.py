"""Exception hierarchy shared by every atomrec module."""


class AtomrecError(Exception):
    """Base class for all package errors."""


class DimensionError(AtomrecError, ValueError):
    """A signal, operator or parameter does not match the ambient space."""


class InfeasibleError(AtomrecError):
    """The recovery program has no feasible point."""


class ConvergenceError(AtomrecError):
    """An iterative solver could not reach its tolerances."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ConfigError(AtomrecError, ValueError):
    """An experiment configuration is malformed or references missing files."""


class RefusedError(AtomrecError):
    """An experiment's preconditions are not met, so it declines to run."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SolverBudgetError(AtomrecError):
    """Too many solver failures inside one experiment cell."""
