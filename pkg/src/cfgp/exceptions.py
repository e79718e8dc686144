"""Exception hierarchy shared across the package."""


class CFGPError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CFGPError, ValueError):
    """An argument violates a documented precondition."""


class NumericalError(CFGPError, ArithmeticError):
    """A factorization failed even after jitter escalation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class StateError(CFGPError, RuntimeError):
    """An object was used before it was ready (e.g. an unfitted model)."""


class FitFailure(CFGPError, RuntimeError):
    """Every optimizer start failed to produce a finite objective."""


class DegenerateCandidate(CFGPError, ValueError):
    """A candidate coincides numerically with an existing design point."""


class OptimizationFailure(CFGPError, RuntimeError):
    """Every start of a criterion search was degenerate."""


class ConfigError(CFGPError, ValueError):
    """Invalid run configuration (maps to CLI exit code 2)."""


class SimulatorError(CFGPError, RuntimeError):
    """The simulator failed at a specific design point."""

    def __init__(self, message, x=None, t=None):
        super().__init__(message)
        self.x = x
        self.t = t
