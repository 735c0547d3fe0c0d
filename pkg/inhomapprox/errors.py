"""
Error Types
===========
Every failure the library can raise carries the CLI exit code it maps to,
so the command-line layer never has to guess.
"""


class InhomApproxError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class IndeterminateAtPrecision(InhomApproxError):
    """A certified decision could not be made before the precision cap."""

    exit_code = 2

    def __init__(self, message, digits=None):
        super().__init__(message)
        self.digits = digits


class RangeExceeded(InhomApproxError):
    """A request needs arithmetic tables beyond the configured sieve limit."""

    exit_code = 3


class BudgetExceeded(InhomApproxError):
    """An exact-arithmetic or summation budget would be exceeded."""

    exit_code = 3


class ZeroMass(InhomApproxError):
    """All measures entering a Chung-Erdos ratio vanish."""

    exit_code = 1


class NotMonotone(InhomApproxError):
    """An approximation function expected to be non-increasing is not."""

    exit_code = 4

    def __init__(self, message, q=None):
        super().__init__(message)
        self.q = q


class ConfigError(InhomApproxError):
    """Invalid experiment configuration; `key` names the offending path."""

    exit_code = 4

    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
