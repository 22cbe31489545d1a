"""Exception hierarchy shared across the package."""


class LeanError(Exception):
    """Base class for every error raised by lean_tvr."""


class DimensionError(LeanError, ValueError):
    """Operand shapes are incompatible."""


class NonFiniteError(LeanError, ArithmeticError):
    """A computation produced NaN or Inf."""


class GraphError(LeanError, ValueError):
    """Invalid hypergraph construction input."""


class FormatError(LeanError, ValueError):
    """Malformed tensor file (magic, version, dtype)."""


class MagicError(FormatError):
    """File does not start with the expected magic bytes."""


class VersionError(FormatError):
    pass


class DTypeError(FormatError):
    pass


class SizeError(FormatError):
    """Tensor payload length disagrees with the declared dims."""


class ManifestError(LeanError, ValueError):
    """A dataset manifest record failed validation."""

    def __init__(self, record_id, message, errors=None):
        self.record_id = record_id
        self.errors = errors if errors is not None else [(record_id, message)]
        super().__init__(f"record {record_id!r}: {message}")


class CheckpointError(LeanError, ValueError):
    """Checkpoint could not be read back."""


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class UnknownParameterError(CheckpointError, KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown parameter in checkpoint: {name!r}")

    def __str__(self):
        return self.args[0]
