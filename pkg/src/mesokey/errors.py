"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so keep the split between validation,
numerical and I/O failures meaningful.
"""


class MesokeyError(Exception):
    """Base class for all package errors."""


class DomainError(MesokeyError, ValueError):
    """An argument lies outside the operation's mathematical domain."""


class ConfigurationError(MesokeyError, ValueError):
    """A protocol or CLI configuration is inconsistent."""


class DegenerateSeedError(DomainError):
    """An LFSR was seeded with the absorbing all-zero state."""


class NumericalError(MesokeyError, ArithmeticError):
    """A numerical routine failed or produced an invalid result."""


class TruncationError(NumericalError):
    """The angular-momentum truncation is too small for the photon number."""
