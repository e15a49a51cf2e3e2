"""Exception hierarchy shared by every module."""


class MixedOrderError(ValueError):
    """Base class for all library errors."""


class NotHermitian(MixedOrderError):
    pass


class NotPSD(MixedOrderError):
    pass


class BadSiteSet(MixedOrderError):
    pass


class DimensionMismatch(MixedOrderError):
    pass


class TooLarge(MixedOrderError):
    pass


class BadProbability(MixedOrderError):
    pass


class BadWeights(MixedOrderError):
    pass


class CompletenessViolated(MixedOrderError):
    pass


class DegeneratePurity(MixedOrderError):
    pass


class BadPartition(MixedOrderError):
    pass


class BadGrid(MixedOrderError):
    pass


class BadAlpha(MixedOrderError):
    pass


class SingularReference(MixedOrderError):
    pass


class BadSchedule(MixedOrderError):
    pass


class ConfigInvalid(MixedOrderError):
    pass


class ResourceExceeded(MixedOrderError):
    pass
