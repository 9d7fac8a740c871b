"""Exception types shared across the package."""


class FocklabError(Exception):
    pass


class CapacityError(FocklabError):
    """Requested truncated space exceeds the configured size budget."""


class TruncationError(FocklabError):
    """State mass above the occupation cutoff exceeds the allowed threshold."""

    def __init__(self, msg, required_n_max=None):
        super().__init__(msg)
        self.required_n_max = required_n_max


class H1ViolationError(FocklabError):
    """One-particle operator fails the standing hypothesis; message names the clause."""


class ConsistencyError(FocklabError):
    """Two redundant internal formulas disagree; signals a convention bug."""


class DomainViolationError(FocklabError):
    """A weighted series diverged (terms growing) instead of converging."""


class BlowUpError(FocklabError):
    """Classical field norm doubled within one step or became non-finite."""


class HorizonError(FocklabError):
    """Fixed-point iteration stopped contracting: integration horizon too long."""


class ConfigError(FocklabError):
    """Malformed experiment configuration or model file."""
