"""Exception hierarchy. Each class carries the CLI exit code for its category."""


class CamsimError(Exception):
    exit_code = 1


class ConfigError(CamsimError):
    exit_code = 3


class DataFileError(CamsimError):
    """Missing or malformed input file (spectra, ray pairs, PGM, profiles)."""

    exit_code = 4


class ValidationError(CamsimError, ValueError):
    """Argument violates an operation precondition."""

    exit_code = 5


class RankDeficientError(CamsimError):
    exit_code = 6


class WavelengthError(CamsimError, KeyError):
    exit_code = 5

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class VignettedError(CamsimError):
    """Every traced ray was clipped by a pupil or became non-physical."""

    exit_code = 6


class EstimationError(CamsimError):
    """A calibration estimate could not be formed (saturation, bad moments...)."""

    exit_code = 7


class EdgeNotFoundError(CamsimError):
    exit_code = 7


class NoRegionsError(CamsimError):
    exit_code = 7
