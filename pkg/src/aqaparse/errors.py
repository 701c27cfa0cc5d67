"""Exception hierarchy shared across the package."""


class AqaError(Exception):
    """Base class for all package errors."""


class ConfigError(AqaError):
    """Invalid or inconsistent configuration."""


class DataError(AqaError):
    """A sample or dataset violates its invariants."""


class ManifestError(AqaError):
    """Malformed manifest or corpus file (fatal parse error)."""


class MaskCodecError(AqaError):
    """Corrupt run-length record."""


class CheckpointError(AqaError):
    """Unreadable checkpoint or config-hash mismatch."""


class MetricError(AqaError):
    """A metric is undefined for the given inputs (e.g. constant ranks)."""


class TrainingError(AqaError):
    """Training aborted (e.g. non-finite loss)."""
