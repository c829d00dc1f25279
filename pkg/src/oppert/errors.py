"""Exception hierarchy.

Two branches matter to callers: ConfigError (bad input or configuration,
CLI exit code 2) and NumericalError (a computation failed or a validity
check tripped, CLI exit code 3).
"""

from __future__ import annotations


class OppertError(Exception):
    """Base class for everything raised on purpose by this package."""


class ConfigError(OppertError):
    pass


class NumericalError(OppertError):
    pass


# --- input / precondition violations -------------------------------------

class LengthMismatch(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class WeightNormalization(ConfigError):
    pass


class PoleHit(ConfigError):
    pass


class PointOnSupport(ConfigError):
    pass


class SupportNotPositive(ConfigError):
    pass


class EtaTooLarge(ConfigError):
    pass


class ContourTooClose(ConfigError):
    pass


class OnCut(ConfigError):
    pass


# --- algorithmic failures --------------------------------------------------

class NoConvergence(NumericalError):
    pass


class EdgeCountOdd(NumericalError):
    pass


class SubcriticalSpike(NumericalError):
    pass


class SupportEscapes(NumericalError):
    pass


class InfeasibleConstraints(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class CircleIntersectsSupport(NumericalError):
    pass


class Breakdown(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class DegenerateGap(NumericalError):
    pass


class TruncationFailure(NumericalError):
    pass


class DivisorHit(NumericalError):
    pass


class PathThroughCut(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class NonpositiveDensity(NumericalError):
    pass


class ThetaDenominatorZero(NumericalError):
    pass


class QuadratureNonConvergence(NumericalError):
    pass
