"""Match low-resolution measurement edges to high-resolution street paths."""

__version__ = "0.1.0"

from .criteria import CriterionId, CriterionScores, score_all
from .geometry import DirectedSegment, Point
from .matcher import CandidatePath, Matcher, MatchResult, RunSummary
from .network import (
    MeasurementNetwork,
    MeasurementSegment,
    SpatialIndex,
    StreetNetwork,
    consolidate,
    knn,
    load_measurements,
    load_street_network,
)

__all__ = [
    "CandidatePath",
    "CriterionId",
    "CriterionScores",
    "DirectedSegment",
    "Matcher",
    "MatchResult",
    "MeasurementNetwork",
    "MeasurementSegment",
    "Point",
    "RunSummary",
    "SpatialIndex",
    "StreetNetwork",
    "consolidate",
    "knn",
    "load_measurements",
    "load_street_network",
    "score_all",
    "__version__",
]
