"""Post-run analytics: ranked score curves, criterion correlations, worst-N
extracts, and the CSV/GeoJSON exports.

Scores are min-max normalized per criterion over the matched set; a constant
column normalizes to all zeros.  Every export is a deterministic byte stream
for fixed inputs, so repeated runs diff clean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .criteria import CriterionId
from .errors import EmptyRun
from .matcher import MatchResult
from .network import MeasurementNetwork
from .runio import write_text_atomic

# Fig-5-style defaults: the length and area criteria discriminate sharply,
# the angle criteria need a longer tail.
DEFAULT_WORST_N = {
    CriterionId.LC: 50,
    CriterionId.RC: 300,
    CriterionId.SC: 300,
    CriterionId.AC: 50,
}


@dataclass(frozen=True)
class ScoreTableRow:
    seg_id: str
    criterion_used: CriterionId
    raw: dict[str, float]
    normalized: dict[str, float]


@dataclass(frozen=True)
class WorstNExtract:
    criterion: CriterionId
    n: int
    seg_ids: tuple[str, ...]


def _matched(results: Iterable[MatchResult]) -> list[MatchResult]:
    return [r for r in results if r.matched]


def normalized_scores(results: Sequence[MatchResult]) -> dict[str, dict[str, float]]:
    """Per-criterion min-max normalized scores, keyed by segment id."""
    matched = _matched(results)
    out: dict[str, dict[str, float]] = {}
    for crit in CriterionId:
        values = {r.seg_id: r.scores.get(crit) for r in matched}
        if not values:
            out[crit.value] = {}
            continue
        lo = min(values.values())
        hi = max(values.values())
        span = hi - lo
        if span == 0.0:
            out[crit.value] = {sid: 0.0 for sid in values}
        else:
            out[crit.value] = {sid: (v - lo) / span for sid, v in values.items()}
    return out


def score_table(results: Sequence[MatchResult]) -> list[ScoreTableRow]:
    matched = sorted(_matched(results), key=lambda r: r.seg_id)
    norms = normalized_scores(results)
    return [
        ScoreTableRow(
            seg_id=r.seg_id,
            criterion_used=r.criterion_used,
            raw=r.scores.as_dict(),
            normalized={c: norms[c][r.seg_id] for c in ("lc", "rc", "sc", "ac")},
        )
        for r in matched
    ]


def rank_curve(
    results: Sequence[MatchResult], criterion: CriterionId
) -> list[tuple[int, float]]:
    """Normalized scores in ascending order: (rank, score), rank from 0."""
    matched = _matched(results)
    if not matched:
        raise EmptyRun("rank_curve needs at least one matched segment")
    norms = normalized_scores(results)[criterion.value]
    ordered = sorted(norms.values())
    return list(enumerate(ordered))


def correlation_pairs(
    results: Sequence[MatchResult], used: CriterionId, other: CriterionId
) -> list[tuple[float, float]]:
    """One (used, other) normalized score pair per matched segment."""
    matched = _matched(results)
    if not matched:
        raise EmptyRun("correlation_pairs needs at least one matched segment")
    for r in matched:
        if r.criterion_used != used:
            raise ValueError(
                f"results were matched with {r.criterion_used.value}, not {used.value}"
            )
    norms = normalized_scores(results)
    return [
        (norms[used.value][r.seg_id], norms[other.value][r.seg_id])
        for r in sorted(matched, key=lambda r: r.seg_id)
    ]


def worst_n(
    results: Sequence[MatchResult], criterion: CriterionId, n: int
) -> WorstNExtract:
    """The n matched segments scoring worst under ``criterion``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    matched = _matched(results)
    if not matched:
        raise EmptyRun("worst_n needs at least one matched segment")
    ranked = sorted(matched, key=lambda r: (-r.scores.get(criterion), r.seg_id))
    picked = ranked[: min(n, len(ranked))]
    return WorstNExtract(criterion=criterion, n=n, seg_ids=tuple(r.seg_id for r in picked))


# ---------------------------------------------------------------------------
# exports


def scores_csv_text(results: Sequence[MatchResult]) -> str:
    lines = ["seg_id,criterion_used,lc,rc,sc,ac,lc_norm,rc_norm,sc_norm,ac_norm"]
    for row in score_table(results):
        raw = row.raw
        norm = row.normalized
        lines.append(
            ",".join(
                [row.seg_id, row.criterion_used.value]
                + [repr(raw[c]) for c in ("lc", "rc", "sc", "ac")]
                + [repr(norm[c]) for c in ("lc", "rc", "sc", "ac")]
            )
        )
    return "\n".join(lines) + "\n"


def parse_scores_csv(text: str) -> list[ScoreTableRow]:
    lines = [ln for ln in text.splitlines() if ln]
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append(
            ScoreTableRow(
                seg_id=parts[0],
                criterion_used=CriterionId.parse(parts[1]),
                raw=dict(zip(("lc", "rc", "sc", "ac"), map(float, parts[2:6]))),
                normalized=dict(zip(("lc", "rc", "sc", "ac"), map(float, parts[6:10]))),
            )
        )
    return rows


def _feature(geometry_coords, properties) -> dict:
    return {
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": geometry_coords},
        "properties": properties,
    }


def matched_geojson(
    results: Sequence[MatchResult],
    measurements: MeasurementNetwork,
    override_flags: dict[str, str] | None = None,
) -> dict:
    """FeatureCollection of matched segments carrying the chosen street path."""
    override_flags = override_flags or {}
    feats = []
    for r in sorted(_matched(results), key=lambda r: r.seg_id):
        seg = measurements.segments[r.seg_id]
        props = {
            "seg_id": r.seg_id,
            "sensor_id": seg.sensor_id,
            "status": r.status,
            "criterion_used": r.criterion_used.value,
            "candidates_evaluated": r.candidates_evaluated,
            "street_edges": list(r.street_edges),
            "override": override_flags.get(r.seg_id),
            **r.scores.as_dict(),
        }
        coords = [[p.x, p.y] for p in r.chosen.points]
        feats.append(_feature(coords, props))
    return {"type": "FeatureCollection", "features": feats}


def unmatched_geojson(
    results: Sequence[MatchResult],
    measurements: MeasurementNetwork,
    override_flags: dict[str, str] | None = None,
) -> dict:
    override_flags = override_flags or {}
    feats = []
    for r in sorted(results, key=lambda r: r.seg_id):
        if r.matched:
            continue
        seg = measurements.segments[r.seg_id]
        feats.append(
            _feature(
                [[seg.a.x, seg.a.y], [seg.b.x, seg.b.y]],
                {
                    "seg_id": r.seg_id,
                    "sensor_id": seg.sensor_id,
                    "status": r.status,
                    "reason": r.reason,
                    "override": override_flags.get(r.seg_id),
                },
            )
        )
    return {"type": "FeatureCollection", "features": feats}


def worst_n_geojson(
    results: Sequence[MatchResult],
    measurements: MeasurementNetwork,
    criterion: CriterionId,
    n: int,
) -> dict:
    extract = worst_n(results, criterion, n)
    by_id = {r.seg_id: r for r in results}
    feats = []
    for sid in extract.seg_ids:
        r = by_id[sid]
        seg = measurements.segments[sid]
        feats.append(
            _feature(
                [[p.x, p.y] for p in r.chosen.points],
                {
                    "seg_id": sid,
                    "sensor_id": seg.sensor_id,
                    "criterion": criterion.value,
                    "score": r.scores.get(criterion),
                },
            )
        )
    return {"type": "FeatureCollection", "features": feats}


def geojson_text(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def export(
    results: Sequence[MatchResult],
    measurements: MeasurementNetwork,
    out_dir: str,
    run_id: str,
    fmt: str = "both",
    override_flags: dict[str, str] | None = None,
) -> list[str]:
    """Write the score table and/or GeoJSON layers; returns written paths."""
    import os

    if fmt not in ("csv", "geojson", "both"):
        raise ValueError(f"unknown export format {fmt!r}")
    written = []
    if fmt in ("csv", "both"):
        path = os.path.join(out_dir, f"{run_id}.scores.csv")
        write_text_atomic(path, scores_csv_text(results))
        written.append(path)
    if fmt in ("geojson", "both"):
        path = os.path.join(out_dir, f"{run_id}.matched.geojson")
        write_text_atomic(path, geojson_text(matched_geojson(results, measurements, override_flags)))
        written.append(path)
        path = os.path.join(out_dir, f"{run_id}.unmatched.geojson")
        write_text_atomic(path, geojson_text(unmatched_geojson(results, measurements, override_flags)))
        written.append(path)
    return written


def export_analytics(
    results: Sequence[MatchResult],
    measurements: MeasurementNetwork,
    out_dir: str,
    run_id: str,
    used: CriterionId,
    worst_defaults: dict[CriterionId, int] | None = None,
) -> list[str]:
    """Rank curves, correlation pairs, and worst-N layers for one run."""
    import os

    worst_defaults = worst_defaults or DEFAULT_WORST_N
    written = []
    for crit in CriterionId:
        curve = rank_curve(results, crit)
        lines = ["rank,normalized_score"]
        lines += [f"{rank},{repr(score)}" for rank, score in curve]
        path = os.path.join(out_dir, f"{run_id}.rank_{crit.value}.csv")
        write_text_atomic(path, "\n".join(lines) + "\n")
        written.append(path)
    for other in CriterionId:
        if other == used:
            continue
        pairs = correlation_pairs(results, used, other)
        lines = [f"{used.value}_norm,{other.value}_norm"]
        lines += [f"{repr(u)},{repr(o)}" for u, o in pairs]
        path = os.path.join(out_dir, f"{run_id}.corr_{used.value}_{other.value}.csv")
        write_text_atomic(path, "\n".join(lines) + "\n")
        written.append(path)
    for crit in CriterionId:
        n = worst_defaults.get(crit, 50)
        doc = worst_n_geojson(results, measurements, crit, n)
        path = os.path.join(out_dir, f"{run_id}.worst_{crit.value}.geojson")
        write_text_atomic(path, geojson_text(doc))
        written.append(path)
    return written
