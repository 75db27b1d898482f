"""Exception hierarchy shared by all crosshash modules.

Every error carries the name of the module that raised it and a short
remediation hint so the command line layer can surface actionable
diagnostics.
"""


class CrosshashError(Exception):
    """Base class for all package errors."""

    module = "crosshash"
    hint = "check the inputs against the documented contract"

    def __init__(self, message, *, module=None, hint=None):
        super().__init__(message)
        if module is not None:
            self.module = module
        if hint is not None:
            self.hint = hint


class StoreFormatError(CrosshashError):
    """Corrupt or malformed on-disk artifact (bad magic, truncation, checksum)."""

    module = "ingestion"
    hint = "regenerate the file; it is corrupt or not a crosshash artifact"


class ZeroNormError(CrosshashError):
    """A feature vector has zero norm and cannot be unit-normalized."""

    module = "ingestion"
    hint = "remove or fix the offending sample before re-exporting features"


class LabelError(CrosshashError):
    """Label matrix violates the multi-hot contract."""

    module = "ingestion"
    hint = "every labeled sample needs at least one active label"


class ConfigError(CrosshashError):
    """A configuration value is outside its documented range."""

    hint = "adjust the flagged configuration value"


class ContractViolationError(CrosshashError):
    """An operation received input violating its precondition."""

    module = "structure-mining"
    hint = "normalize the inputs before calling this operation"


class DegenerateInputError(CrosshashError):
    """Numerically degenerate input (e.g. a zero-norm code or view sum)."""

    hint = "inspect the flagged sample; its representation collapsed to zero"


class TrainingDivergedError(CrosshashError):
    """Loss became NaN/Inf during optimization."""

    module = "hashing-network"
    hint = "lower the learning rate or inspect the flagged batch"
