"""Exact gapless Unruh-DeWitt / spin-boson model: infrared and ultraviolet
diagnostics, closed-form Heisenberg dynamics, thermal states and a
truncated Fock-space oracle."""

from .errors import (BudgetExceededError, ConfigError, ConvergenceError, DivergenceError,
                     DomainError, InconclusiveError, InfiniteSoftBosonsError, QuadratureError,
                     SingularPointError, TruncationError, UDWError, UnboundedBelowError,
                     UnsupportedScenarioError)
from .modespace import (CompactBump, CouplingFunction, Dispersion, Gaussian, Lorentzian,
                        ModeSpace, Pointlike, PowerRegularized, Tabulated, TestFunction,
                        inner_product)
from .diagnostics import Classification, Region, classify, r_integral

__version__ = "0.1.0"
