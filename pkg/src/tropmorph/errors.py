"""Domain errors raised by the library.

Every error carries a short machine-readable ``code`` equal to its class name so the
CLI can report it without parsing messages.
"""
from __future__ import annotations


class TropError(Exception):
    """Base class for every domain error raised by :mod:`tropmorph`."""

    @property
    def code(self) -> str:
        return type(self).__name__


class DisconnectedGraph(TropError):
    pass


class UnknownVertex(TropError):
    pass


class UnknownEdge(TropError):
    pass


class GenusZero(TropError):
    pass


class GenusTooSmall(TropError):
    pass


class MetricLoop(TropError):
    pass


class MalformedPartition(TropError):
    pass


class InvalidDatum(TropError):
    pass


class TargetNotTree(TropError):
    pass


class SearchSpaceTooLarge(TropError):
    pass


class InconsistentDegree(TropError):
    pass


class NonPositiveLength(TropError):
    pass


class NotSquare(TropError):
    pass


class Singular(TropError):
    pass


class PreconditionViolated(TropError):
    pass


class Unclassifiable(TropError):
    pass


class GenusDrops(TropError):
    pass


class LimitsNotIsomorphic(TropError):
    pass


class InvalidMergedValency(TropError):
    pass


class NonTrivalentSkeleton(TropError):
    pass


class CaseDispatchFailure(TropError):
    pass


class InvalidLimit(TropError):
    pass


class BalancingViolation(TropError):
    pass


class SearchExhausted(TropError):
    pass


class PerturbationFailed(TropError):
    pass


class StepLimitExceeded(TropError):
    pass


class LollipopViolation(TropError):
    pass


class LoopContraction(TropError):
    """Raised when asked to contract a loop (this would lower the genus)."""
