"""Exception types raised by the library's contract checks."""


class ReidlabError(Exception):
    """Base class for all library errors."""


class ConfigError(ReidlabError):
    """Invalid configuration; message lists offending field paths."""


class ZeroVectorError(ReidlabError):
    """A vector with (near) zero norm reached a normalization step."""


class ShapeMismatchError(ReidlabError):
    """Array dimensions do not chain with the expected shapes."""


class NoCacheError(ReidlabError):
    """backward() called without a matching forward() cache."""


class NonFiniteFunctionError(ReidlabError):
    """Objective returned NaN/Inf during a finite-difference probe."""


class ZeroCapacityError(ReidlabError):
    """Feature dictionary requires capacity >= 1."""


class UnnormalizedFeatureError(ReidlabError):
    """Feature norm deviates from 1 beyond tolerance at dictionary insert."""


class UnnormalizedInputError(ReidlabError):
    """cosine_distance operand is not unit-norm."""


class EmptyBatchError(ReidlabError):
    """Loss evaluation requires at least one subgroup."""


class TrueClassNotSelectedError(ReidlabError):
    """A proposal's true class is missing from the selection pool."""


class GallerySizeTooSmallError(ReidlabError):
    """Gallery cannot hold one match per probe identity."""


class NoRelevantItemError(ReidlabError):
    """A query identity has no match in the gallery."""


class NumericalFailureError(ReidlabError):
    """A non-finite loss or parameter was detected; the run is aborted."""
