"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class HedlundError(Exception):
    """Base class for all package errors."""


# polytope validation
class PolytopeError(HedlundError, ValueError):
    pass


class DimensionTooSmall(PolytopeError):
    pass


class ZeroVector(PolytopeError):
    pass


class NotSymmetric(PolytopeError):
    pass


class NotSpanning(PolytopeError):
    pass


class NotExtreme(PolytopeError):
    pass


class DegenerateFacet(PolytopeError):
    pass


class NotInIntegerCone(PolytopeError):
    pass


# geometry / construction
class PlacementFailed(HedlundError):
    pass


class SamplingTooCoarse(HedlundError, ValueError):
    pass


class CertificationFailed(HedlundError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


# solver
class OutOfMemoryBudget(HedlundError):
    pass


class TargetOutsideBox(HedlundError, ValueError):
    pass


class ConfigError(HedlundError, ValueError):
    pass
