"""Exception hierarchy shared by all modules."""


class DomainError(ValueError):
    """Argument outside the domain where a quantity is defined."""


class SingularityError(ArithmeticError):
    """An integrand or payout hits the d = 0 singularity of the excursion rate."""


class NoBracketError(ArithmeticError):
    """A root search found no sign change on its bracket."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""
