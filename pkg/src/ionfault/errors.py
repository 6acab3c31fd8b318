"""Exception types shared across the package.

Each error that can escape the CLI carries the process exit code it maps to.
"""
from __future__ import annotations


class IonFaultError(Exception):
    exit_code = 1


class ConfigError(IonFaultError, ValueError):
    exit_code = 4


class InvalidDeviceError(ConfigError):
    pass


class InvalidLabelError(IonFaultError, ValueError):
    pass


class DomainError(IonFaultError, ValueError):
    pass


class UnsupportedRepetitionError(ConfigError):
    pass


class MultiFaultError(IonFaultError):
    """A syndrome cannot come from a single fault."""


class DecodeFailureError(IonFaultError):
    """Observed results match no single-fault candidate."""


class IncompletePlanError(IonFaultError):
    pass


class TooManyFaultsError(IonFaultError):
    exit_code = 3


class MissingRecordError(IonFaultError):
    """Replay records do not cover a requested test.

    ``missing`` holds the specs that still need to be measured.
    """

    exit_code = 2

    def __init__(self, missing, message: str | None = None):
        self.missing = list(missing)
        ids = ", ".join(s.id for s in self.missing[:5])
        more = "" if len(self.missing) <= 5 else f" (+{len(self.missing) - 5} more)"
        super().__init__(message or f"no record for test(s): {ids}{more}")


class RecordValidationError(ConfigError):
    pass


class UnsupportedBackendError(IonFaultError):
    pass


class SimulationCapError(UnsupportedBackendError):
    pass


class UndefinedFidelityError(IonFaultError, ValueError):
    pass


class UnfittableScanError(IonFaultError, ValueError):
    pass


class IncompleteModelError(IonFaultError, ValueError):
    pass
