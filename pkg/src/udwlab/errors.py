"""Exception hierarchy shared by all modules."""


class UDWError(Exception):
    """Base class for every error raised by udwlab."""


class DomainError(UDWError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class SingularPointError(DomainError):
    """Evaluation requested at a measure-zero singular point (e.g. k=0, massless)."""


class QuadratureError(UDWError):
    """Adaptive quadrature exhausted its panel budget before meeting tolerance."""

    def __init__(self, message, value=None, error=None, panels=None):
        super().__init__(message)
        self.value = value
        self.error = error
        self.panels = panels


class InconclusiveError(UDWError):
    """Neither convergence nor divergence could be certified.

    ``diagnostics`` carries whatever partial information was gathered
    (fit residuals, quadrature state) so callers can report it.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DivergenceError(UDWError):
    """A required integral diverges. ``end`` is ``"IR"`` or ``"UV"``."""

    def __init__(self, message, end=None, exponent=None):
        super().__init__(message)
        self.end = end
        self.exponent = exponent


class UnboundedBelowError(DivergenceError):
    """R_1 diverges: the Hamiltonian has no finite lower bound."""


class InfiniteSoftBosonsError(DivergenceError):
    """R_2 diverges on the requested region: infinitely many soft bosons."""


class UnsupportedScenarioError(UDWError):
    """The exact solution does not cover the requested configuration."""


class TruncationError(UDWError):
    """Fock truncation is too small for the requested expectation value."""


class BudgetExceededError(UDWError):
    """Oracle Hilbert-space dimension exceeds the configured budget."""

    def __init__(self, message, dimension=None, budget=None):
        super().__init__(message)
        self.dimension = dimension
        self.budget = budget


class ConvergenceError(UDWError):
    """An n_max sweep (or similar refinement) did not converge."""

    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table or []


class ConfigError(UDWError, ValueError):
    """Malformed run configuration; ``keys`` lists the offending paths."""

    def __init__(self, message, keys=()):
        super().__init__(message)
        self.keys = list(keys)
