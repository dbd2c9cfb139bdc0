"""Typed errors shared across the package.

The split matters for the CLI exit codes: DataError subclasses map to exit
code 2, NumericError subclasses to exit code 3.
"""


class MiFusionError(Exception):
    pass


class NumericError(MiFusionError):
    pass


class NotPositiveDefinite(NumericError):
    """Cholesky factorization hit a non-positive pivot (degenerate covariance)."""


class NonFiniteLoss(NumericError):
    """A loss or one of its evaluations produced NaN or inf."""


class InsufficientSamples(NumericError):
    """A polarity class has fewer than 2 samples, so its variance is undefined."""


class ZeroVector(NumericError):
    """A vector with norm below 1e-12 cannot be normalized for scoring."""


class UnknownToken(NumericError):
    """A token id falls outside the embedding table."""


class EmptyBatch(NumericError):
    pass


class ZeroVariance(NumericError):
    """Pearson correlation is undefined when either sequence is constant."""


class EmptyAfterExclusion(NumericError):
    """No samples remain once zero-label entries are excluded."""


class DataError(MiFusionError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class WidthMismatch(DataError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class VersionMismatch(DataError):
    pass


class CorruptFile(DataError):
    pass


class ConfigError(DataError):
    pass
