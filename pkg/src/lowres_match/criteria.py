"""The four scoring criteria judging a candidate path against its segment.

LC compares lengths (meters, anchor gaps included), RC averages the absolute
turn angles inside the path, SC averages the absolute link angles against the
segment direction, and AC measures the unsigned area between path and
segment.  Lower is better for all four; a candidate coinciding with its
segment scores zero everywhere.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .geometry import DirectedSegment, absolute_area, angle_sequence

if TYPE_CHECKING:
    from .matcher import CandidatePath
    from .network import MeasurementSegment


class CriterionId(enum.Enum):
    LC = "lc"
    RC = "rc"
    SC = "sc"
    AC = "ac"

    @classmethod
    def parse(cls, text: str) -> "CriterionId":
        try:
            return cls(text.lower())
        except ValueError:
            raise ValueError(
                f"unknown criterion {text!r}; expected one of lc, rc, sc, ac"
            ) from None


@dataclass(frozen=True)
class CriterionScores:
    lc: float
    rc: float
    sc: float
    ac: float

    def get(self, criterion: CriterionId) -> float:
        return getattr(self, criterion.value)

    def as_dict(self) -> dict[str, float]:
        return {"lc": self.lc, "rc": self.rc, "sc": self.sc, "ac": self.ac}


def _base_segment(candidate: "CandidatePath", seg: "MeasurementSegment") -> DirectedSegment:
    """Segment directed from the anchored start endpoint toward the end."""
    if candidate.orientation == "ab":
        return DirectedSegment(seg.a, seg.b)
    return DirectedSegment(seg.b, seg.a)


def score_lc(candidate: "CandidatePath", seg: "MeasurementSegment") -> float:
    """Length difference in meters, anchor gaps added to the path length."""
    total = candidate.anchor_start_m + candidate.path_length_m + candidate.anchor_end_m
    return abs(total - seg.length_m)


def score_rc(candidate: "CandidatePath", seg: "MeasurementSegment") -> float:
    """Mean absolute turn angle at the path's interior nodes (radians).

    A single-edge path has no turns and is maximally straight: 0.
    """
    seq = angle_sequence(candidate.points, _base_segment(candidate, seg))
    return _mean_abs(seq.running)


def score_sc(candidate: "CandidatePath", seg: "MeasurementSegment") -> float:
    """Mean absolute angle between each path link and the segment (radians)."""
    seq = angle_sequence(candidate.points, _base_segment(candidate, seg))
    return _mean_abs(seq.straight)


def score_ac(candidate: "CandidatePath", seg: "MeasurementSegment") -> float:
    """Unsigned area between the path and the segment (square meters).

    Integrates over the path proper; the anchor gaps belong to LC and are
    deliberately not closed into the area.
    """
    return absolute_area(candidate.points, _base_segment(candidate, seg))


def score_all(candidate: "CandidatePath", seg: "MeasurementSegment") -> CriterionScores:
    """All four scores of one candidate, computed off a single angle pass."""
    base = _base_segment(candidate, seg)
    seq = angle_sequence(candidate.points, base)
    return CriterionScores(
        lc=score_lc(candidate, seg),
        rc=_mean_abs(seq.running),
        sc=_mean_abs(seq.straight),
        ac=absolute_area(candidate.points, base),
    )


def _mean_abs(angles: tuple[float, ...]) -> float:
    if not angles:
        return 0.0
    return sum(abs(a) for a in angles) / len(angles)
