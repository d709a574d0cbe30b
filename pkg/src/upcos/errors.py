"""Exception hierarchy shared by all modules."""


class UpcosError(ValueError):
    """Base class for every error raised by this package."""


class DimensionError(UpcosError):
    pass


class NumericInputError(UpcosError):
    """Non-finite value in an input vector."""


class SingularCovarianceError(UpcosError):
    """A precision or covariance entry that must be positive is not."""


class InvalidCovarianceError(UpcosError):
    """Negative variance supplied where a covariance diagonal is expected."""


class PropagationOverflowError(UpcosError):
    pass


class DegenerateEmbeddingError(UpcosError):
    """Zero-norm embedding; cannot define a direction."""


class ConfigurationError(UpcosError):
    pass


class EstimationError(UpcosError):
    """Not enough (or too degenerate) data to estimate a statistic."""


class MetricError(UpcosError):
    pass


class UndefinedCorrelationError(MetricError):
    pass


class SamplingError(UpcosError):
    pass


class FormatError(UpcosError):
    """Malformed input file."""

    def __init__(self, path, lineno, msg):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {msg}")


class MissingEmbeddingError(UpcosError):
    """One or more trial ids have no embedding; ``missing`` lists them all."""

    def __init__(self, missing):
        self.missing = list(missing)
        shown = " ".join(self.missing[:20])
        more = f" (+{len(self.missing) - 20} more)" if len(self.missing) > 20 else ""
        super().__init__(f"missing embeddings for {len(self.missing)} id(s): {shown}{more}")
