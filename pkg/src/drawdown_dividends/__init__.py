"""Dividend barriers under generalized draw-down stopping for drifted BM and its transforms."""
from .drawdown import AffineDrawdown, DrawdownFn, Violation, validate
from .errors import ConfigError, DomainError, NoBracketError, SingularityError
from .models import DriftedBMModel, Identity, LogAffine, TransformModel
from .pontryagin import PMPConfig, PMPSolution, levy_optimal, optimize, verify_pmp
from .valuation import ValueBreakdown, objective_J, survival_factor, value

__version__ = "0.1.0"
