"""Exception taxonomy shared across the package.

The classes map onto the CLI exit codes: configuration problems exit with
code 2, numeric failures with code 3, and verification failures (a device
not meeting its own design check) with code 1.
"""


class TilnsimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TilnsimError):
    """Malformed or inconsistent configuration input (file, grid, units)."""


class DomainError(TilnsimError, ValueError):
    """Parameter outside its physical or validated domain."""


class NotGuidedError(TilnsimError):
    """Requested mode is below cutoff for the given geometry and wavelength.

    Deliberately distinct from :class:`NumericError`: absence of a guided
    mode is a legitimate physical answer, not a solver breakdown.
    """


class NumericError(TilnsimError):
    """A numerical routine failed to converge or returned garbage."""


class DesignError(TilnsimError):
    """A device specification fails its construction-time design checks."""


class AmbiguousPairingError(TilnsimError):
    """Mode-pair reduction found one mode phase-matched to two partners."""


class InfeasiblePlanError(TilnsimError):
    """Phase-equalization constraints cannot be met with the given minima."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals
