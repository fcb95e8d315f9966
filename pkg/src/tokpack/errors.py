"""Exception hierarchy shared across the package."""


class TokpackError(Exception):
    """Base class for all tokpack errors."""


class PartitionError(TokpackError):
    """A packet assignment is not a valid partition of the token positions."""


class DivisibilityError(TokpackError):
    """Token count K is not divisible by the packet length M."""


class CorpusError(TokpackError):
    """A corpus file is malformed."""


class DimensionMismatch(TokpackError):
    """Two vectors of different dimensions were combined."""


class ZeroNormError(TokpackError):
    """A zero-norm vector reached a cosine computation."""


class ProviderError(TokpackError):
    """An embedding provider failed to produce a vector."""


class EnumerationLimitError(TokpackError):
    """An exhaustive enumeration would exceed its configured guard."""


class DegenerateGroupError(TokpackError):
    """An operation needs at least two packets to act on."""


class ConfigError(TokpackError):
    """An experiment or search configuration is inconsistent."""
