"""Exception types shared across the package."""


class PhonsegError(Exception):
    """Base class for all package errors."""


class DimensionError(PhonsegError):
    """Operand shapes do not agree. No implicit broadcasting anywhere."""


class ConfigError(PhonsegError):
    """Invalid or inconsistent configuration."""


class TrainingError(PhonsegError):
    """Training diverged or produced non-finite gradients."""


class G2PError(PhonsegError):
    """Character sequence contains symbols no rule covers."""


class SpecValidationError(PhonsegError):
    """Toy language spec violates its own separability guarantees."""


class InfeasibleTargetError(PhonsegError):
    """CTC target cannot be emitted in the given number of frames."""


class OracleSizeError(PhonsegError):
    """Enumeration oracle state space exceeds its hard bound."""


class DataError(PhonsegError):
    """Malformed or empty training data."""


class UndefinedRateError(PhonsegError):
    """Rate metric with an empty or zero-length reference."""


class AnalysisError(PhonsegError):
    """Cluster analysis preconditions not met."""


class TensorFormatError(PhonsegError):
    """Corrupt or unsupported tensor file."""


class ComparisonError(PhonsegError):
    """Variant comparison over mismatched corpora."""
