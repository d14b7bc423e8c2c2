"""Exception hierarchy.  Everything derives from :class:`GeometryError`."""


class GeometryError(Exception):
    pass


class DomainViolation(GeometryError, ValueError):
    pass


class RankDeficient(GeometryError):
    pass


class MaximalRankViolation(RankDeficient):
    pass


class BasePointMismatch(GeometryError, ValueError):
    pass


class NotCompact(GeometryError):
    pass


class Unreachable(GeometryError):
    pass


class DriftExceeded(GeometryError):
    pass


class InsufficientSamples(GeometryError, ValueError):
    pass


class FullnessFailed(GeometryError):
    pass


class NonPositiveR(GeometryError, ValueError):
    pass


class DescriptorError(GeometryError, ValueError):
    pass


class VerificationFailed(GeometryError):
    """Raised by ``Report.raise_for_verdict`` when a checked inequality fails."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class HypothesisFailed(VerificationFailed):
    pass


class Indeterminate(VerificationFailed):
    pass
